#ifndef CHRONOFIT_LIKELIHOOD_HPP_
#define CHRONOFIT_LIKELIHOOD_HPP_

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "chronofit/quadrature.hpp"
#include "chronofit/spline.hpp"
#include "chronofit/types.hpp"

namespace chronofit {

// Everything the likelihood needs besides data and parameters: the spline
// layout, quadrature sizes, the post-event shape hook g (null = identity,
// g(s) = s), which covariate columns drive the hazard, and the worker count
// for dataset-level evaluation.
struct LikContext {
  SplineSpec spec;
  int gl_nodes = 20;
  int gh_nodes = 20;
  std::function<double(double)> changepoint_g;  // null -> identity
  std::vector<int> hazard_cols;
  int threads = 1;
};

LikContext make_context(const Dataset& dataset, const SplineSpec& spec,
                        int gl_nodes = 20, int gh_nodes = 20);

// --- component densities (direct implementations, also used standalone) ---

// Sum over phase-1 visits (time <= V) of the log Gaussian density of the
// marker residual M(t_j) - beta X(t_j) - z_j a, marginalized to the observed
// coordinates.
double phase1_logdensity(const Subject& subject, const Eigen::VectorXd& a,
                         const Parameters& params);

// Same over phase-2 visits (time >= U) with the residual shifted by
// gamma_k * g(t_j - e) for candidate change point e.
double phase2_logdensity(const Subject& subject, const Eigen::VectorXd& a,
                         const Parameters& params, double e,
                         const std::function<double(double)>& g = nullptr);

// Subject-level cumulative hazard at t: sum over visit intervals intersected
// with [0, t] of exp(theta_x' X + theta_a' a + theta_m' M) * dLambda0, with
// covariates and markers held at their left-endpoint values (first visit's
// values before the first visit, last-observation-carried-forward for
// missing markers).
double subject_cum_hazard(const Subject& subject, const Eigen::VectorXd& a,
                          const Parameters& params, double t,
                          const LikContext& ctx);

// Generic overload over an arbitrary baseline Lambda0; this is the exact
// formula the simulator inverts, so sampler and likelihood agree by
// construction.
double subject_cum_hazard(const Subject& subject, const Eigen::VectorXd& a,
                          const Parameters& params, double t,
                          const std::function<double(double)>& baseline_cum,
                          const std::vector<int>& hazard_cols);

// log f(t | phase-1 history, a): log lambda0(t) + linear predictor at t-
// minus the subject cumulative hazard at t. Requires V < t <= U.
double event_logdensity(double t, const Subject& subject,
                        const Eigen::VectorXd& a, const Parameters& params,
                        const LikContext& ctx);

// --- observed-data likelihood ---

// Caches per-subject structure (phase splits, hazard segments, design
// matrices) so repeated evaluations at new parameters stay cheap. All
// methods are const and safe to call concurrently.
class LikEvaluator {
 public:
  LikEvaluator(const Dataset& dataset, const LikContext& ctx);
  ~LikEvaluator();
  LikEvaluator(LikEvaluator&&) noexcept;

  int n_subjects() const;
  const LikContext& context() const;

  // Per-subject observed-data log-likelihood; entries are finite or -inf,
  // never NaN. Parallel over context().threads.
  Eigen::VectorXd per_subject(const Parameters& params) const;
  // Same for a resampled index list (duplicates evaluated once).
  Eigen::VectorXd per_subject(const Parameters& params,
                              const std::vector<int>& subject_idx) const;

  double subject_value(int index, const Parameters& params) const;

  // Compensated (Neumaier) sum of per_subject in index order.
  double total(const Parameters& params) const;

  // total() plus a diagnostic naming the offending subject when the result
  // is -inf (or the covariance problem when Sigma_e is near singular).
  double total_report(const Parameters& params, std::string* diagnostic) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Convenience wrappers (they build a LikEvaluator internally).
double subject_loglik(const Subject& subject, const Parameters& params,
                      const LikContext& ctx);
Eigen::VectorXd per_subject_loglik(const Dataset& dataset,
                                   const Parameters& params,
                                   const LikContext& ctx);
double total_loglik(const Dataset& dataset, const Parameters& params,
                    const LikContext& ctx);

}  // namespace chronofit

#endif  // CHRONOFIT_LIKELIHOOD_HPP_
