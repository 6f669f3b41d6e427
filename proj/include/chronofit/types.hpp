#ifndef CHRONOFIT_TYPES_HPP_
#define CHRONOFIT_TYPES_HPP_

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

namespace chronofit {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

// One longitudinal assessment: time in years, the biomarker panel with a
// per-entry observed mask, the fixed-effect design row (also the pool the
// hazard covariates are drawn from), and the random-effect design row.
struct Visit {
  double time = 0.0;
  Eigen::VectorXd markers;       // length K; entries with observed[k]==false ignored
  std::vector<bool> observed;    // length K
  Eigen::VectorXd covariates_x;  // length p, time-varying entries already evaluated at `time`
  Eigen::VectorXd covariates_z;  // length q_z, defaults to the scalar 1

  int n_observed() const {
    int c = 0;
    for (bool b : observed) c += b ? 1 : 0;
    return c;
  }
};

// One individual: visit history plus the censoring bracket (V, U] and the
// event indicator. delta == 0 means right censored at the last visit
// (bracket_u == +infinity); delta == 1 means the event lies between two
// adjacent visits.
struct Subject {
  std::string id;
  std::vector<Visit> visits;
  double bracket_v = 0.0;
  double bracket_u = kInfinity;
  int delta = 0;
};

// Full sieve parameter vector in unconstrained coordinates. The spline
// coefficients are alpha_j = sum_{l<=j} exp(xi_l), so any real xi yields a
// positive non-decreasing alpha. chol_a / chol_e hold lower-triangular
// Cholesky factors of Sigma_a / Sigma_e with the diagonal stored on log
// scale, making every field free of constraints.
struct Parameters {
  Eigen::VectorXd xi;       // q_n spline coordinates
  Eigen::MatrixXd beta;     // K x p fixed effects, one row per biomarker
  Eigen::VectorXd gamma;    // K post-event slopes
  Eigen::VectorXd theta_x;  // p_s hazard covariate effects
  Eigen::VectorXd theta_a;  // K random-effect hazard effects
  Eigen::VectorXd theta_m;  // K biomarker hazard effects
  Eigen::MatrixXd chol_a;   // K x K lower triangular, log diagonal
  Eigen::MatrixXd chol_e;   // K x K lower triangular, log diagonal

  int panel_dim() const { return static_cast<int>(gamma.size()); }
  int fixed_dim() const { return static_cast<int>(beta.cols()); }
  int hazard_dim() const { return static_cast<int>(theta_x.size()); }
  int basis_count() const { return static_cast<int>(xi.size()); }

  // alpha_j = cumulative sums of exp(xi)
  Eigen::VectorXd alpha() const;

  // Natural-scale Cholesky factors (diagonal exponentiated) and covariances.
  Eigen::MatrixXd chol_a_factor() const;
  Eigen::MatrixXd chol_e_factor() const;
  Eigen::MatrixXd sigma_a() const;
  Eigen::MatrixXd sigma_e() const;

  static Parameters zeros(int q_n, int K, int p, int p_s);
};

struct Dataset {
  std::vector<Subject> subjects;
  int panel_dim = 0;   // K
  int fixed_dim = 0;   // p
  int hazard_dim = 0;  // p_s
  int re_dim = 1;      // q_z
  // Indices into Visit::covariates_x forming the hazard design row
  // (size hazard_dim).
  std::vector<int> hazard_cols;
};

// Flattening for the optimizer. Order: xi, beta row by row, gamma, theta_x,
// theta_a, theta_m, chol_a lower triangle row by row (log diagonal in
// place), chol_e likewise. unpack(pack(p)) == p exactly.
Eigen::VectorXd pack(const Parameters& params);
Parameters unpack(const Eigen::VectorXd& packed, int q_n, int K, int p, int p_s);
int packed_size(int q_n, int K, int p, int p_s);

// Human-readable coordinate names in packed order (used by result tables).
std::vector<std::string> packed_names(int q_n, int K, int p, int p_s);

struct Violation {
  std::string subject_id;  // empty for dataset-level rules
  std::string rule;
  std::string detail;
};

// Diagnostic check of every Subject/Dataset invariant; empty result means
// the dataset is well formed.
std::vector<Violation> validate(const Dataset& dataset);

}  // namespace chronofit

#endif  // CHRONOFIT_TYPES_HPP_
