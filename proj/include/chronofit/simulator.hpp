#ifndef CHRONOFIT_SIMULATOR_HPP_
#define CHRONOFIT_SIMULATOR_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "chronofit/spline.hpp"
#include "chronofit/types.hpp"

namespace chronofit {

// Deterministic RNG: mt19937_64 engine with explicit uniform/normal
// transforms so streams are identical across platforms and standard
// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  double uniform();  // (0, 1)
  double uniform(double a, double b);
  double normal();   // Box-Muller
  double exponential();  // rate 1
  Eigen::VectorXd normal_vector(int k);
  int uniform_int(int n);  // [0, n)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Counter-style sub-seed derivation so parallel generation stays
// reproducible: stream separates uses (subjects, replicates, bootstrap), the
// index walks within a stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index);

// Baseline hazard used by the generator: closed-form power law
// Lambda0(t) = (rate * t)^shape, or a spline to be inverted numerically.
struct BaselineTruth {
  enum class Kind { power, spline };
  Kind kind = Kind::power;
  double rate = 0.2;
  double shape = 1.5;
  SplineSpec spec;      // spline kind only
  Eigen::VectorXd xi;

  double cumulative(double t) const;
  double inverse_cumulative(double y) const;
};

struct SimTruth {
  Eigen::MatrixXd beta;     // K x 3, columns [intercept, time, x]
  Eigen::VectorXd gamma;    // K
  Eigen::VectorXd theta_x;  // 1
  Eigen::VectorXd theta_a;  // K
  Eigen::VectorXd theta_m;  // K
  Eigen::MatrixXd sigma_a;
  Eigen::MatrixXd sigma_e;
  BaselineTruth baseline;

  static SimTruth defaults();  // the K=2 reference configuration

  // Truth mapped into a Parameters object; xi is projected onto the given
  // spline layout (for bias tables) or zeroed when spec is null.
  Parameters as_parameters(const SplineSpec* spec) const;
};

struct SimConfig {
  int n = 400;
  SimTruth truth = SimTruth::defaults();
  int visit_count = 11;  // includes the baseline visit at time 0
  double jitter = 0.2;
  std::uint64_t seed = 1;
  double x_scale = 0.8;
  bool x_scale_is_variance = true;  // interpret x_scale as Var(X)
};

struct SubjectTruth {
  Eigen::VectorXd a;
  double event_time = kInfinity;  // latent E, +inf when no event occurred
  double x = 0.0;
};

// Baseline visit at 0 plus visit_count-1 draws t_j ~ U(j-jitter, j+jitter).
std::vector<double> gen_visit_times(const SimConfig& config, Rng& rng);

// One subject under the two-phase generating process; the hazard between
// visits uses the observed left-endpoint marker values, matching the
// likelihood's extrapolation rule exactly.
Subject gen_subject(const SimConfig& config, Rng& rng,
                    SubjectTruth* truth = nullptr);

struct SimOutput {
  Dataset dataset;
  std::vector<SubjectTruth> truths;
};

SimOutput gen_dataset(const SimConfig& config);

}  // namespace chronofit

#endif  // CHRONOFIT_SIMULATOR_HPP_
