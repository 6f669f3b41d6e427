#include "chronofit/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace chronofit {

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the orthogonal
// polynomial recurrence; weights come from the first eigenvector components.
QuadRule golub_welsch(const Eigen::VectorXd& offdiag, double weight_mass) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n - 1; ++i) {
    jacobi(i, i + 1) = offdiag[i];
    jacobi(i + 1, i) = offdiag[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = weight_mass * v0 * v0;
  }
  return rule;
}

}  // namespace

QuadRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("gauss_legendre: need finite a < b");
  QuadRule rule;
  if (n == 1) {
    rule.nodes = Eigen::VectorXd::Constant(1, 0.0);
    rule.weights = Eigen::VectorXd::Constant(1, 2.0);
  } else {
    Eigen::VectorXd off(n - 1);
    for (int i = 1; i < n; ++i)
      off[i - 1] = i / std::sqrt(4.0 * i * i - 1.0);
    rule = golub_welsch(off, 2.0);
  }
  // Map [-1, 1] -> [a, b].
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  rule.nodes = (mid + half * rule.nodes.array()).matrix();
  rule.weights *= half;
  return rule;
}

QuadRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  if (n == 1) {
    QuadRule rule;
    rule.nodes = Eigen::VectorXd::Constant(1, 0.0);
    rule.weights = Eigen::VectorXd::Constant(1, std::sqrt(M_PI));
    return rule;
  }
  Eigen::VectorXd off(n - 1);
  for (int i = 1; i < n; ++i) off[i - 1] = std::sqrt(0.5 * i);
  return golub_welsch(off, std::sqrt(M_PI));
}

GaussHermiteMv gauss_hermite_mv(int n, const Eigen::MatrixXd& chol) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_mv: n must be >= 1");
  if (chol.rows() != chol.cols() || chol.rows() < 1 || !chol.allFinite())
    throw std::invalid_argument("gauss_hermite_mv: chol must be a finite square matrix");
  const int K = static_cast<int>(chol.rows());
  QuadRule one_d = gauss_hermite(n);

  long total = 1;
  for (int k = 0; k < K; ++k) total *= n;

  GaussHermiteMv rule;
  rule.points.resize(total, K);
  rule.weights.resize(total);
  const double norm = std::pow(M_PI, -0.5 * K);
  Eigen::VectorXd u(K);
  std::vector<int> idx(K, 0);
  for (long i = 0; i < total; ++i) {
    double w = norm;
    for (int k = 0; k < K; ++k) {
      u[k] = one_d.nodes[idx[k]];
      w *= one_d.weights[idx[k]];
    }
    rule.points.row(i) = (std::sqrt(2.0) * chol * u).transpose();
    rule.weights[i] = w;
    for (int k = K - 1; k >= 0; --k) {
      if (++idx[k] < n) break;
      idx[k] = 0;
    }
  }
  return rule;
}

}  // namespace chronofit
