#include "chronofit/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "chronofit/parallel.hpp"

namespace chronofit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index) {
  return splitmix64(splitmix64(master ^ (stream * 0xD2B74407B1CE6E93ULL)) + index);
}

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

double Rng::uniform() {
  // 53-bit mantissa in (0, 1); reject exact zeros.
  for (;;) {
    double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform(), u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::exponential() { return -std::log(uniform()); }

Eigen::VectorXd Rng::normal_vector(int k) {
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v[i] = normal();
  return v;
}

int Rng::uniform_int(int n) {
  int v = static_cast<int>(uniform() * n);
  return v >= n ? n - 1 : v;
}

double BaselineTruth::cumulative(double t) const {
  if (t <= 0.0) return 0.0;
  if (kind == Kind::power) return std::pow(rate * t, shape);
  return cumulative_hazard(spec, xi, std::min(t, spec.tau));
}

double BaselineTruth::inverse_cumulative(double y) const {
  if (y <= 0.0) return 0.0;
  if (kind == Kind::power) return std::pow(y, 1.0 / shape) / rate;
  // Monotone bisection on [0, tau].
  double lo = 0.0, hi = spec.tau;
  if (cumulative(hi) < y) return kInfinity;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (cumulative(mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

SimTruth SimTruth::defaults() {
  SimTruth t;
  t.beta.resize(2, 3);
  t.beta << 5.0, -0.2, -0.3,
            5.0, -0.2, -0.3;
  t.gamma = Eigen::Vector2d(-0.4, -0.4);
  t.theta_x = Eigen::VectorXd::Constant(1, 0.3);
  t.theta_a = Eigen::Vector2d(0.1, 0.1);
  t.theta_m = Eigen::Vector2d(-0.2, -0.2);
  t.sigma_a.resize(2, 2);
  t.sigma_a << 0.5, 0.1, 0.1, 0.5;
  t.sigma_e.resize(2, 2);
  t.sigma_e << 0.5, std::sqrt(2.0) / 10.0, std::sqrt(2.0) / 10.0, 1.0;
  return t;
}

Parameters SimTruth::as_parameters(const SplineSpec* spec) const {
  const int K = static_cast<int>(gamma.size());
  const int p = static_cast<int>(beta.cols());
  const int p_s = static_cast<int>(theta_x.size());
  int q_n = spec ? spec->basis_count() : 4;
  Parameters out = Parameters::zeros(q_n, K, p, p_s);
  if (spec)
    out.xi = project_xi(*spec, [this](double t) { return baseline.cumulative(t); });
  out.beta = beta;
  out.gamma = gamma;
  out.theta_x = theta_x;
  out.theta_a = theta_a;
  out.theta_m = theta_m;
  Eigen::MatrixXd la = Eigen::LLT<Eigen::MatrixXd>(sigma_a).matrixL();
  Eigen::MatrixXd le = Eigen::LLT<Eigen::MatrixXd>(sigma_e).matrixL();
  for (int i = 0; i < K; ++i)
    for (int j = 0; j <= i; ++j) {
      out.chol_a(i, j) = (i == j) ? std::log(la(i, j)) : la(i, j);
      out.chol_e(i, j) = (i == j) ? std::log(le(i, j)) : le(i, j);
    }
  return out;
}

std::vector<double> gen_visit_times(const SimConfig& config, Rng& rng) {
  std::vector<double> times{0.0};
  for (int j = 1; j < config.visit_count; ++j)
    times.push_back(rng.uniform(j - config.jitter, j + config.jitter));
  return times;
}

Subject gen_subject(const SimConfig& config, Rng& rng, SubjectTruth* truth) {
  const SimTruth& tr = config.truth;
  const int K = static_cast<int>(tr.gamma.size());
  Eigen::MatrixXd chol_a = Eigen::LLT<Eigen::MatrixXd>(tr.sigma_a).matrixL();
  Eigen::MatrixXd chol_e = Eigen::LLT<Eigen::MatrixXd>(tr.sigma_e).matrixL();

  std::vector<double> times = gen_visit_times(config, rng);
  const int m = static_cast<int>(times.size());
  double x_sd = config.x_scale_is_variance ? std::sqrt(config.x_scale)
                                           : config.x_scale;
  double x = x_sd * rng.normal();
  Eigen::VectorXd a = chol_a * rng.normal_vector(K);

  // Pre-event trajectories M_inf at the visit grid.
  Eigen::MatrixXd m_inf(m, K);
  for (int j = 0; j < m; ++j) {
    Eigen::Vector3d design(1.0, times[j], x);
    m_inf.row(j) =
        (tr.beta * design + a + chol_e * rng.normal_vector(K)).transpose();
  }

  // Inverse-transform event time on the piecewise multiplier structure the
  // likelihood uses: multiplier of (t_j, t_{j+1}] from the left visit.
  double draw = rng.exponential();
  double event = kInfinity;
  double cum = 0.0;
  for (int j = 0; j + 1 < m; ++j) {
    double mult = std::exp(tr.theta_x[0] * x + tr.theta_a.dot(a) +
                           tr.theta_m.dot(m_inf.row(j)));
    double lam_lo = tr.baseline.cumulative(times[j]);
    double lam_hi = tr.baseline.cumulative(times[j + 1]);
    double inc = mult * (lam_hi - lam_lo);
    if (cum + inc >= draw) {
      double need = lam_lo + (draw - cum) / mult;
      double e = tr.baseline.inverse_cumulative(need);
      event = std::min(std::max(e, std::nextafter(times[j], kInfinity)),
                       times[j + 1]);
      break;
    }
    cum += inc;
  }

  Subject s;
  s.visits.resize(m);
  for (int j = 0; j < m; ++j) {
    Visit& v = s.visits[j];
    v.time = times[j];
    v.markers = m_inf.row(j).transpose();
    if (times[j] >= event)
      v.markers += tr.gamma * (times[j] - event);
    v.observed.assign(K, true);
    v.covariates_x = Eigen::Vector3d(1.0, times[j], x);
    v.covariates_z = Eigen::VectorXd::Constant(1, 1.0);
  }
  if (std::isfinite(event)) {
    int ui = 0;
    while (times[ui] < event) ++ui;
    s.delta = 1;
    s.bracket_v = times[ui - 1];
    s.bracket_u = times[ui];
  } else {
    s.delta = 0;
    s.bracket_v = times[m - 1];
    s.bracket_u = kInfinity;
  }
  if (truth) {
    truth->a = a;
    truth->event_time = event;
    truth->x = x;
  }
  return s;
}

SimOutput gen_dataset(const SimConfig& config) {
  if (config.n < 1) throw std::invalid_argument("gen_dataset: n must be >= 1");
  SimOutput out;
  out.dataset.panel_dim = static_cast<int>(config.truth.gamma.size());
  out.dataset.fixed_dim = 3;
  out.dataset.hazard_dim = 1;
  out.dataset.re_dim = 1;
  out.dataset.hazard_cols = {2};
  out.dataset.subjects.resize(config.n);
  out.truths.resize(config.n);
  parallel_for(
      static_cast<std::size_t>(config.n),
      [&](std::size_t i) {
        Rng rng(derive_seed(config.seed, /*stream=*/1, i));
        out.dataset.subjects[i] =
            gen_subject(config, rng, &out.truths[i]);
        out.dataset.subjects[i].id = "s" + std::to_string(i + 1);
      },
      0);
  return out;
}

}  // namespace chronofit
