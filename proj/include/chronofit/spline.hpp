#ifndef CHRONOFIT_SPLINE_HPP_
#define CHRONOFIT_SPLINE_HPP_

#include <Eigen/Dense>
#include <functional>

#include "chronofit/types.hpp"

namespace chronofit {

// Cubic B-spline layout for the baseline cumulative hazard: clamped (open)
// knot vector on [0, tau] with the boundary knots repeated degree+1 times.
struct SplineSpec {
  int degree = 3;
  Eigen::VectorXd interior_knots;  // strictly increasing, inside (0, tau)
  double tau = 0.0;

  int basis_count() const {
    return static_cast<int>(interior_knots.size()) + degree + 1;
  }
};

// Basis evaluator caching the full clamped knot vector. Evaluation clamps
// nothing: t outside [0, tau] is an error at the call sites below.
class BsplineBasis {
 public:
  explicit BsplineBasis(const SplineSpec& spec);

  int basis_count() const { return n_basis_; }
  double tau() const { return tau_; }

  // All q_n basis values at t (dense; only degree+1 are nonzero).
  Eigen::VectorXd basis(double t) const;

  // Lambda0(t) = sum_j alpha_j B_j(t) with alpha the cumulative sums of
  // exp(xi); non-decreasing in t for any xi.
  double cumulative(const Eigen::VectorXd& alpha, double t) const;

  // lambda0(t) = d/dt Lambda0(t); non-negative because the alpha increments
  // exp(xi_j) are.
  double derivative(const Eigen::VectorXd& alpha, double t) const;

 private:
  int find_span(double t) const;
  void basis_funs(int span, double t, int degree, double* values) const;

  int degree_;
  int n_basis_;
  double tau_;
  Eigen::VectorXd knots_;
};

// Data-driven spec: round(q^(1/3)) interior knots (q = number of distinct
// finite bracket endpoints) at equally spaced quantiles of those values;
// tau = 1.01 * the largest relevant time.
SplineSpec default_spec(const Dataset& dataset);
SplineSpec spec_with_knot_count(const Dataset& dataset, int interior_knots);

double cumulative_hazard(const SplineSpec& spec, const Eigen::VectorXd& xi,
                         double t);
double hazard(const SplineSpec& spec, const Eigen::VectorXd& xi, double t);

// Unconstrained least-squares projection of a target cumulative hazard onto
// the spline, mapped back to xi coordinates (increments floored at a tiny
// positive value so the result stays in the admissible set).
Eigen::VectorXd project_xi(const SplineSpec& spec,
                           const std::function<double(double)>& target,
                           int grid_points = 200);

}  // namespace chronofit

#endif  // CHRONOFIT_SPLINE_HPP_
