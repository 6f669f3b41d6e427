#ifndef CHRONOFIT_OPTIMIZER_HPP_
#define CHRONOFIT_OPTIMIZER_HPP_

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "chronofit/likelihood.hpp"
#include "chronofit/types.hpp"

namespace chronofit {

struct FitOptions {
  double fd_delta = 1e-6;   // relative central-difference step
  double rel_tol = 1e-3;    // stop when max relative parameter change < this
  int max_iter = 200;
  int max_halvings = 30;
  double pinv_tol = 1e-8;   // eigenvalue cutoff relative to the largest
  int threads = 1;          // finite-difference column parallelism
  bool verbose = false;
};

struct FitResult {
  Parameters params_hat;
  std::vector<double> loglik_trace;  // non-decreasing by construction
  int iterations = 0;
  bool converged = false;
  double final_score_norm = 0.0;  // max-abs total score at the last scoring pass
};

// Objective interface: maps a packed coordinate vector to the vector of
// per-subject log-likelihood contributions.
using PerSubjectFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Central-difference per-subject score matrix (n x P). Steps are
// delta * max(1, |x_u|) per coordinate; a perturbed point with a non-finite
// contribution is retried with the step cut tenfold, up to 3 times.
Eigen::MatrixXd fd_score(const PerSubjectFn& fn, const Eigen::VectorXd& x,
                         double delta, int threads = 1);

// Sum of per-subject score outer products (Gram matrix of the rows).
Eigen::MatrixXd empirical_info(const Eigen::MatrixXd& scores);

// Moore-Penrose pseudoinverse of a symmetric matrix via eigendecomposition,
// zeroing eigenvalues below tol * max|eigenvalue|.
Eigen::MatrixXd generalized_inverse(const Eigen::MatrixXd& m,
                                    double tol = 1e-8);

struct ScoringResult {
  Eigen::VectorXd x;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  double final_score_norm = 0.0;
};

// Fisher scoring with step-halving line search on a generic per-subject
// objective. Ascent direction pinv(I) * score with I the empirical
// information; the line search keeps the trace monotone.
ScoringResult fisher_scoring(const PerSubjectFn& fn, const Eigen::VectorXd& init,
                             const FitOptions& opts);

// Full-model fit in packed coordinates.
FitResult fisher_scoring_fit(const Dataset& dataset, const Parameters& init,
                             const LikContext& ctx, const FitOptions& opts);

// Same against a prebuilt evaluator, optionally on a resampled subject index
// list (used by the bootstrap).
FitResult fisher_scoring_fit(const LikEvaluator& eval, const Parameters& init,
                             const FitOptions& opts);
FitResult fisher_scoring_fit(const LikEvaluator& eval,
                             const std::vector<int>& subject_idx,
                             const Parameters& init, const FitOptions& opts);

}  // namespace chronofit

#endif  // CHRONOFIT_OPTIMIZER_HPP_
