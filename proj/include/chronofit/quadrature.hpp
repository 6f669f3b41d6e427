#ifndef CHRONOFIT_QUADRATURE_HPP_
#define CHRONOFIT_QUADRATURE_HPP_

#include <Eigen/Dense>

namespace chronofit {

// One-dimensional rule: strictly increasing nodes, positive weights.
struct QuadRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

// n-point Gauss-Legendre rule on [a, b]; exact for polynomials of degree
// <= 2n-1, weights summing to b-a.
QuadRule gauss_legendre(int n, double a, double b);

// n-point Gauss-Hermite rule for weight exp(-x^2) on the real line
// (physicists' convention); weights sum to sqrt(pi).
QuadRule gauss_hermite(int n);

// Tensor-product Gauss-Hermite rule for a K-variate Gaussian expectation.
// For a ~ N(0, chol * chol^T),
//   E[g(a)] ~= sum_i weights[i] * g(points.row(i)),
// with points.row(i) = sqrt(2) * chol * u_i and the pi^{-K/2} normalizer
// folded into the weights (so they sum to 1). Exact for polynomials of
// degree <= 2n-1 per axis.
struct GaussHermiteMv {
  Eigen::MatrixXd points;   // n^K x K
  Eigen::VectorXd weights;  // n^K, positive, sums to 1
};

GaussHermiteMv gauss_hermite_mv(int n, const Eigen::MatrixXd& chol);

}  // namespace chronofit

#endif  // CHRONOFIT_QUADRATURE_HPP_
