#include "chronofit/spline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

namespace chronofit {

BsplineBasis::BsplineBasis(const SplineSpec& spec)
    : degree_(spec.degree),
      n_basis_(spec.basis_count()),
      tau_(spec.tau) {
  if (spec.degree != 3)
    throw std::invalid_argument("BsplineBasis: degree is fixed at 3");
  if (!(tau_ > 0.0)) throw std::invalid_argument("BsplineBasis: tau must be > 0");
  if (n_basis_ < 4) throw std::invalid_argument("BsplineBasis: need q_n >= 4");
  const int m = static_cast<int>(spec.interior_knots.size());
  for (int i = 0; i < m; ++i) {
    double k = spec.interior_knots[i];
    if (!(k > 0.0 && k < tau_))
      throw std::invalid_argument("BsplineBasis: interior knot outside (0, tau)");
    if (i > 0 && !(spec.interior_knots[i - 1] < k))
      throw std::invalid_argument("BsplineBasis: interior knots not increasing");
  }
  knots_.resize(m + 2 * (degree_ + 1));
  for (int i = 0; i <= degree_; ++i) knots_[i] = 0.0;
  for (int i = 0; i < m; ++i) knots_[degree_ + 1 + i] = spec.interior_knots[i];
  for (int i = 0; i <= degree_; ++i) knots_[degree_ + 1 + m + i] = tau_;
}

int BsplineBasis::find_span(double t) const {
  if (!(t >= 0.0 && t <= tau_))
    throw std::domain_error("BsplineBasis: t outside [0, tau]");
  const int lo = degree_;
  const int hi = static_cast<int>(knots_.size()) - degree_ - 2;
  if (t >= tau_) return hi;
  // knots_[lo..hi+1] partition [0, tau]; binary search for T[s] <= t < T[s+1]
  int a = lo, b = hi;
  while (a < b) {
    int mid = (a + b + 1) / 2;
    if (knots_[mid] <= t)
      a = mid;
    else
      b = mid - 1;
  }
  return a;
}

void BsplineBasis::basis_funs(int span, double t, int degree,
                              double* values) const {
  // Cox-de Boor triangle; values[0..degree] are B_{span-degree+r, degree}(t).
  double left[8], right[8];
  values[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double temp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
}

Eigen::VectorXd BsplineBasis::basis(double t) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_basis_);
  int span = find_span(t);
  double vals[4];
  basis_funs(span, t, degree_, vals);
  for (int r = 0; r <= degree_; ++r) out[span - degree_ + r] = vals[r];
  return out;
}

double BsplineBasis::cumulative(const Eigen::VectorXd& alpha, double t) const {
  int span = find_span(t);
  double vals[4];
  basis_funs(span, t, degree_, vals);
  double acc = 0.0;
  for (int r = 0; r <= degree_; ++r) acc += alpha[span - degree_ + r] * vals[r];
  return acc;
}

double BsplineBasis::derivative(const Eigen::VectorXd& alpha, double t) const {
  // d/dt sum_j alpha_j B_{j,3} = sum_i 3 (alpha_i - alpha_{i-1}) /
  // (T_{i+3} - T_i) * B_{i,2}, the boundary terms vanishing on the clamped
  // knot vector.
  int span = find_span(t);
  double vals[3];
  basis_funs(span, t, 2, vals);
  double acc = 0.0;
  for (int r = 0; r <= 2; ++r) {
    int i = span - 2 + r;
    if (i < 1 || i > n_basis_ - 1) continue;
    double den = knots_[i + 3] - knots_[i];
    if (den <= 0.0) continue;
    acc += 3.0 * (alpha[i] - alpha[i - 1]) / den * vals[r];
  }
  return acc;
}

namespace {

Eigen::VectorXd alpha_from_xi(const Eigen::VectorXd& xi) {
  Eigen::VectorXd a(xi.size());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < xi.size(); ++j) {
    acc += std::exp(xi[j]);
    a[j] = acc;
  }
  return a;
}

// Linear-interpolation empirical quantile of a sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t q = sorted.size();
  if (q == 1) return sorted[0];
  double h = p * static_cast<double>(q - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= q - 1) return sorted[q - 1];
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

SplineSpec build_spec(const Dataset& dataset, int interior) {
  std::set<double> distinct;
  double tmax = 0.0;
  for (const auto& s : dataset.subjects) {
    if (std::isfinite(s.bracket_v)) {
      distinct.insert(s.bracket_v);
      tmax = std::max(tmax, s.bracket_v);
    }
    if (std::isfinite(s.bracket_u)) {
      distinct.insert(s.bracket_u);
      tmax = std::max(tmax, s.bracket_u);
    }
    if (!s.visits.empty()) tmax = std::max(tmax, s.visits.back().time);
  }
  if (distinct.empty())
    throw std::invalid_argument("default_spec: no finite bracket endpoints");
  std::vector<double> sorted(distinct.begin(), distinct.end());

  SplineSpec spec;
  spec.degree = 3;
  spec.tau = 1.01 * tmax;
  if (!(spec.tau > 0.0))
    throw std::invalid_argument("default_spec: all times are zero");

  int want = interior;
  if (want < 0) {
    double q = static_cast<double>(sorted.size());
    want = std::max(1, static_cast<int>(std::llround(std::cbrt(q))));
  }
  std::vector<double> knots;
  for (int i = 1; i <= want; ++i) {
    double k = quantile_sorted(sorted, static_cast<double>(i) / (want + 1));
    if (k > 0.0 && k < spec.tau &&
        (knots.empty() || k > knots.back()))
      knots.push_back(k);
  }
  if (knots.empty())
    throw std::invalid_argument(
        "default_spec: no usable interior knots after deduplication");
  spec.interior_knots =
      Eigen::Map<Eigen::VectorXd>(knots.data(), static_cast<Eigen::Index>(knots.size()));
  return spec;
}

}  // namespace

SplineSpec default_spec(const Dataset& dataset) { return build_spec(dataset, -1); }

SplineSpec spec_with_knot_count(const Dataset& dataset, int interior_knots) {
  if (interior_knots < 1)
    throw std::invalid_argument("spec_with_knot_count: need >= 1 interior knot");
  return build_spec(dataset, interior_knots);
}

double cumulative_hazard(const SplineSpec& spec, const Eigen::VectorXd& xi,
                         double t) {
  BsplineBasis basis(spec);
  return basis.cumulative(alpha_from_xi(xi), t);
}

double hazard(const SplineSpec& spec, const Eigen::VectorXd& xi, double t) {
  BsplineBasis basis(spec);
  return basis.derivative(alpha_from_xi(xi), t);
}

Eigen::VectorXd project_xi(const SplineSpec& spec,
                           const std::function<double(double)>& target,
                           int grid_points) {
  BsplineBasis basis(spec);
  const int q_n = basis.basis_count();
  Eigen::MatrixXd design(grid_points, q_n);
  Eigen::VectorXd rhs(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    double t = spec.tau * static_cast<double>(i) / (grid_points - 1);
    design.row(i) = basis.basis(t).transpose();
    rhs[i] = target(t);
  }
  Eigen::VectorXd alpha = design.colPivHouseholderQr().solve(rhs);
  double scale = std::max(1.0, alpha.cwiseAbs().maxCoeff());
  Eigen::VectorXd xi(q_n);
  double prev = 0.0;
  for (int j = 0; j < q_n; ++j) {
    double inc = alpha[j] - prev;
    inc = std::max(inc, 1e-10 * scale);
    xi[j] = std::log(inc);
    prev += inc;
  }
  return xi;
}

}  // namespace chronofit
