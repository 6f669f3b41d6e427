#include "chronofit/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "chronofit/parallel.hpp"

namespace chronofit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

double logsumexp(const Eigen::ArrayXd& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m > 0 ? m : kNegInf;
  return m + std::log((v - m).exp().sum());
}

// Neumaier compensated summation.
double compensated_sum(const Eigen::VectorXd& v) {
  double sum = 0.0, comp = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double x = v[i];
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

double apply_g(const std::function<double(double)>& g, double s) {
  return g ? g(s) : s;
}

// Observed-coordinate pattern of a marker panel, with the pieces of the
// Gaussian algebra that depend only on Sigma_e.
struct PatternData {
  std::vector<int> idx;    // observed coordinates
  Eigen::MatrixXd w;       // inverse of Sigma_e[idx, idx]
  Eigen::MatrixXd scatter; // K x K, w scattered to full coordinates
  double lognorm = 0.0;    // -(|O|/2) log 2pi - 0.5 logdet
};

std::uint64_t mask_key(const std::vector<bool>& observed) {
  std::uint64_t key = 0;
  for (std::size_t k = 0; k < observed.size(); ++k)
    if (observed[k]) key |= (std::uint64_t{1} << k);
  return key;
}

struct PreparedParams {
  bool bad = false;
  std::string diagnostic;
  Eigen::MatrixXd beta_t;        // p x K
  Eigen::VectorXd gamma, theta_x, theta_a, theta_m;
  Eigen::MatrixXd inv_sigma_a;   // K x K
  double logdet_sigma_a = 0.0;
  Eigen::VectorXd alpha;
  std::map<std::uint64_t, PatternData> patterns;
};

struct SubjectCache {
  std::string id;
  int delta = 0;
  double V = 0.0, U = kInfinity;
  Eigen::VectorXd times;  // m
  Eigen::MatrixXd x;      // m x p
  Eigen::MatrixXd m;      // m x K, unobserved entries zeroed
  Eigen::VectorXd z;      // m (scalar random-effect design)
  std::vector<std::uint64_t> pattern;  // per visit, 0 = nothing observed
  std::vector<int> phase1, phase2;
  // Hazard step segments: segment s covers (bound[s], bound[s+1]] and takes
  // design values from its left endpoint.
  Eigen::VectorXd seg_bound;             // n_seg + 1, starts at 0
  Eigen::MatrixXd seg_hx;                // n_seg x p_s
  Eigen::MatrixXd seg_hm;                // n_seg x K (LOCF, 0 where missing)
  std::vector<bool> seg_hm_missing;      // any LOCF gap in that segment
  int v_boundary = 0;                    // seg_bound[v_boundary] == V
};

}  // namespace

LikContext make_context(const Dataset& dataset, const SplineSpec& spec,
                        int gl_nodes, int gh_nodes) {
  LikContext ctx;
  ctx.spec = spec;
  ctx.gl_nodes = gl_nodes;
  ctx.gh_nodes = gh_nodes;
  ctx.hazard_cols = dataset.hazard_cols;
  return ctx;
}

// ---------------------------------------------------------------------------
// Direct component densities
// ---------------------------------------------------------------------------

namespace {

double gaussian_visit_logdensity(const Visit& visit,
                                 const Eigen::VectorXd& residual_full,
                                 const Eigen::MatrixXd& sigma_e) {
  std::vector<int> idx;
  for (std::size_t k = 0; k < visit.observed.size(); ++k)
    if (visit.observed[k]) idx.push_back(static_cast<int>(k));
  if (idx.empty()) return 0.0;
  const int d = static_cast<int>(idx.size());
  Eigen::MatrixXd s(d, d);
  Eigen::VectorXd r(d);
  for (int i = 0; i < d; ++i) {
    r[i] = residual_full[idx[i]];
    for (int j = 0; j < d; ++j) s(i, j) = sigma_e(idx[i], idx[j]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) return kNegInf;
  double logdet = 0.0;
  for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  double quad = r.dot(llt.solve(r));
  return -0.5 * d * kLog2Pi - 0.5 * logdet - 0.5 * quad;
}

}  // namespace

double phase1_logdensity(const Subject& subject, const Eigen::VectorXd& a,
                         const Parameters& params) {
  if (!a.allFinite()) throw std::invalid_argument("phase1_logdensity: non-finite a");
  Eigen::MatrixXd sigma_e = params.sigma_e();
  double total = 0.0;
  for (const Visit& v : subject.visits) {
    if (v.time > subject.bracket_v) continue;
    Eigen::VectorXd resid =
        v.markers - params.beta * v.covariates_x - v.covariates_z[0] * a;
    total += gaussian_visit_logdensity(v, resid, sigma_e);
  }
  return total;
}

double phase2_logdensity(const Subject& subject, const Eigen::VectorXd& a,
                         const Parameters& params, double e,
                         const std::function<double(double)>& g) {
  if (!a.allFinite()) throw std::invalid_argument("phase2_logdensity: non-finite a");
  Eigen::MatrixXd sigma_e = params.sigma_e();
  double total = 0.0;
  for (const Visit& v : subject.visits) {
    if (v.time < subject.bracket_u) continue;
    Eigen::VectorXd resid = v.markers - params.beta * v.covariates_x -
                            v.covariates_z[0] * a -
                            params.gamma * apply_g(g, v.time - e);
    total += gaussian_visit_logdensity(v, resid, sigma_e);
  }
  return total;
}

namespace {

// Left-endpoint design rows for the hazard step function: for query time s
// the values come from the last visit at or before s (the first visit when
// s precedes it), with missing markers carried forward.
struct HazardSteps {
  Eigen::VectorXd bounds;
  Eigen::MatrixXd hx;  // n_seg x p_s
  Eigen::MatrixXd hm;  // n_seg x K
  std::vector<bool> hm_missing;
};

HazardSteps build_hazard_steps(const Subject& subject,
                               const std::vector<int>& hazard_cols, int K) {
  const int m = static_cast<int>(subject.visits.size());
  const int p_s = static_cast<int>(hazard_cols.size());
  std::vector<double> bounds{0.0};
  for (const Visit& v : subject.visits)
    if (v.time > 0.0) bounds.push_back(v.time);
  bounds.push_back(kInfinity);
  const int n_seg = static_cast<int>(bounds.size()) - 1;

  HazardSteps steps;
  steps.bounds = Eigen::Map<Eigen::VectorXd>(bounds.data(), n_seg + 1);
  steps.hx.resize(n_seg, p_s);
  steps.hm.resize(n_seg, K);
  steps.hm_missing.assign(n_seg, false);

  Eigen::VectorXd locf = Eigen::VectorXd::Zero(K);
  std::vector<bool> seen(K, false);
  int vi = 0;  // next visit to absorb into the carried-forward state
  for (int s = 0; s < n_seg; ++s) {
    while (vi < m && subject.visits[vi].time <= bounds[s]) {
      const Visit& v = subject.visits[vi];
      for (int k = 0; k < K; ++k)
        if (v.observed[k]) {
          locf[k] = v.markers[k];
          seen[k] = true;
        }
      ++vi;
    }
    // Before the first visit the first visit's values apply.
    const Visit& left = subject.visits[vi == 0 ? 0 : vi - 1];
    for (int c = 0; c < p_s; ++c)
      steps.hx(s, c) = left.covariates_x[hazard_cols[c]];
    if (vi == 0) {
      for (int k = 0; k < K; ++k) {
        steps.hm(s, k) = left.observed[k] ? left.markers[k] : 0.0;
        if (!left.observed[k]) steps.hm_missing[s] = true;
      }
    } else {
      steps.hm.row(s) = locf.transpose();
      for (int k = 0; k < K; ++k)
        if (!seen[k]) steps.hm_missing[s] = true;
    }
  }
  return steps;
}

}  // namespace

double subject_cum_hazard(const Subject& subject, const Eigen::VectorXd& a,
                          const Parameters& params, double t,
                          const std::function<double(double)>& baseline_cum,
                          const std::vector<int>& hazard_cols) {
  const int K = params.panel_dim();
  HazardSteps steps = build_hazard_steps(subject, hazard_cols, K);
  double ta = params.theta_a.dot(a);
  double total = 0.0;
  for (int s = 0; s + 1 <= static_cast<int>(steps.bounds.size()) - 1; ++s) {
    double lo = steps.bounds[s];
    if (lo >= t) break;
    double hi = std::min(steps.bounds[s + 1], t);
    double d = baseline_cum(hi) - baseline_cum(lo);
    if (d > 0.0) {
      if (steps.hm_missing[s])
        throw std::runtime_error("subject_cum_hazard: no observed marker value "
                                 "available for subject " + subject.id);
      double c = params.theta_x.dot(steps.hx.row(s)) +
                 params.theta_m.dot(steps.hm.row(s)) + ta;
      total += std::exp(c) * d;
    }
    if (steps.bounds[s + 1] >= t) break;
  }
  return total;
}

double subject_cum_hazard(const Subject& subject, const Eigen::VectorXd& a,
                          const Parameters& params, double t,
                          const LikContext& ctx) {
  BsplineBasis basis(ctx.spec);
  Eigen::VectorXd alpha = params.alpha();
  auto lam = [&](double s) { return basis.cumulative(alpha, s); };
  return subject_cum_hazard(subject, a, params, t, lam, ctx.hazard_cols);
}

double event_logdensity(double t, const Subject& subject,
                        const Eigen::VectorXd& a, const Parameters& params,
                        const LikContext& ctx) {
  BsplineBasis basis(ctx.spec);
  Eigen::VectorXd alpha = params.alpha();
  double lam0 = std::max(0.0, basis.derivative(alpha, t));

  // Left value: last visit strictly before t, falling back to the first.
  const int K = params.panel_dim();
  int left = 0;
  for (std::size_t j = 0; j < subject.visits.size(); ++j)
    if (subject.visits[j].time < t) left = static_cast<int>(j);
  Eigen::VectorXd locf = Eigen::VectorXd::Zero(K);
  std::vector<bool> seen(K, false);
  for (int j = 0; j <= left; ++j)
    for (int k = 0; k < K; ++k)
      if (subject.visits[j].observed[k]) {
        locf[k] = subject.visits[j].markers[k];
        seen[k] = true;
      }
  for (int k = 0; k < K; ++k)
    if (!seen[k])
      throw std::runtime_error("event_logdensity: no observed marker value for "
                               "subject " + subject.id);
  double c = params.theta_a.dot(a) + params.theta_m.dot(locf);
  for (std::size_t j = 0; j < ctx.hazard_cols.size(); ++j)
    c += params.theta_x[static_cast<Eigen::Index>(j)] *
         subject.visits[left].covariates_x[ctx.hazard_cols[j]];
  double cum = subject_cum_hazard(subject, a, params, t, ctx);
  return (lam0 > 0.0 ? std::log(lam0) : kNegInf) + c - cum;
}

// ---------------------------------------------------------------------------
// Observed-data likelihood evaluator
// ---------------------------------------------------------------------------

struct LikEvaluator::Impl {
  LikContext ctx;
  int K = 0, p = 0, p_s = 0;
  BsplineBasis basis;
  std::vector<SubjectCache> cache;
  // Tensor Gauss-Hermite grid in standardized coordinates.
  Eigen::MatrixXd gh_u;      // N x K
  Eigen::ArrayXd gh_logw;    // N, normalized to sum(exp) == 1
  QuadRule gl01;             // Gauss-Legendre on [0, 1]
  std::vector<std::uint64_t> patterns_present;

  Impl(const Dataset& dataset, const LikContext& c)
      : ctx(c), basis(c.spec) {
    if (ctx.gl_nodes < 2 || ctx.gh_nodes < 2)
      throw std::invalid_argument("LikContext: node counts must be >= 2");
    K = dataset.panel_dim;
    p = dataset.fixed_dim;
    p_s = dataset.hazard_dim;
    if (static_cast<int>(ctx.hazard_cols.size()) != p_s)
      throw std::invalid_argument("LikContext: hazard_cols does not match hazard_dim");

    QuadRule gh1 = gauss_hermite(ctx.gh_nodes);
    long total = 1;
    for (int k = 0; k < K; ++k) total *= ctx.gh_nodes;
    gh_u.resize(total, K);
    gh_logw.resize(total);
    std::vector<int> idx(K, 0);
    const double lognorm = -0.5 * K * std::log(M_PI);
    for (long i = 0; i < total; ++i) {
      double lw = lognorm;
      for (int k = 0; k < K; ++k) {
        gh_u(i, k) = gh1.nodes[idx[k]];
        lw += std::log(gh1.weights[idx[k]]);
      }
      gh_logw[i] = lw;
      for (int k = K - 1; k >= 0; --k) {
        if (++idx[k] < ctx.gh_nodes) break;
        idx[k] = 0;
      }
    }
    gl01 = gauss_legendre(ctx.gl_nodes, 0.0, 1.0);

    std::map<std::uint64_t, bool> seen;
    cache.reserve(dataset.subjects.size());
    for (const auto& s : dataset.subjects) {
      cache.push_back(build_cache(s));
      for (auto key : cache.back().pattern) seen[key] = true;
    }
    for (auto& [key, _] : seen)
      if (key != 0) patterns_present.push_back(key);
  }

  SubjectCache build_cache(const Subject& s) const {
    SubjectCache sc;
    sc.id = s.id;
    sc.delta = s.delta;
    sc.V = s.bracket_v;
    sc.U = s.bracket_u;
    const int m = static_cast<int>(s.visits.size());
    sc.times.resize(m);
    sc.x.resize(m, p);
    sc.m = Eigen::MatrixXd::Zero(m, K);
    sc.z.resize(m);
    sc.pattern.resize(m);
    for (int j = 0; j < m; ++j) {
      const Visit& v = s.visits[j];
      sc.times[j] = v.time;
      sc.x.row(j) = v.covariates_x.transpose();
      sc.z[j] = v.covariates_z.size() > 0 ? v.covariates_z[0] : 1.0;
      for (int k = 0; k < K; ++k)
        if (v.observed[k]) sc.m(j, k) = v.markers[k];
      sc.pattern[j] = mask_key(v.observed);
      if (v.time <= s.bracket_v)
        sc.phase1.push_back(j);
      else if (s.delta == 1 && v.time >= s.bracket_u)
        sc.phase2.push_back(j);
      else
        throw std::invalid_argument("likelihood: subject " + s.id +
                                    " has a visit strictly inside (V, U)");
    }
    HazardSteps steps = build_hazard_steps(s, ctx.hazard_cols, K);
    sc.seg_bound = steps.bounds;
    sc.seg_hx = steps.hx;
    sc.seg_hm = steps.hm;
    sc.seg_hm_missing = steps.hm_missing;
    sc.v_boundary = -1;
    for (Eigen::Index b = 0; b < sc.seg_bound.size(); ++b)
      if (sc.seg_bound[b] == sc.V) sc.v_boundary = static_cast<int>(b);
    if (sc.v_boundary < 0)
      throw std::invalid_argument("likelihood: bracket V of subject " + s.id +
                                  " is not a visit time");
    return sc;
  }

  PreparedParams prepare(const Parameters& params) const {
    if (!pack(params).allFinite())
      throw std::invalid_argument("likelihood: non-finite parameters");
    PreparedParams pp;
    pp.beta_t = params.beta.transpose();
    pp.gamma = params.gamma;
    pp.theta_x = params.theta_x;
    pp.theta_a = params.theta_a;
    pp.theta_m = params.theta_m;
    pp.alpha = params.alpha();

    Eigen::MatrixXd sigma_e = params.sigma_e();
    Eigen::MatrixXd sigma_a = params.sigma_a();
    {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_e);
      double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
      if (!(lo > 0.0) || hi / lo > 1e12) {
        pp.bad = true;
        pp.diagnostic = "Sigma_e numerically singular (condition > 1e12)";
        return pp;
      }
    }
    {
      Eigen::LLT<Eigen::MatrixXd> llt(sigma_a);
      if (llt.info() != Eigen::Success) {
        pp.bad = true;
        pp.diagnostic = "Sigma_a not positive definite";
        return pp;
      }
      pp.inv_sigma_a = llt.solve(Eigen::MatrixXd::Identity(K, K));
      pp.logdet_sigma_a = 0.0;
      for (int i = 0; i < K; ++i)
        pp.logdet_sigma_a += 2.0 * std::log(llt.matrixL()(i, i));
    }
    for (auto key : patterns_present) {
      PatternData pd;
      for (int k = 0; k < K; ++k)
        if (key & (std::uint64_t{1} << k)) pd.idx.push_back(k);
      const int d = static_cast<int>(pd.idx.size());
      Eigen::MatrixXd sub(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) sub(i, j) = sigma_e(pd.idx[i], pd.idx[j]);
      Eigen::LLT<Eigen::MatrixXd> llt(sub);
      if (llt.info() != Eigen::Success) {
        pp.bad = true;
        pp.diagnostic = "Sigma_e submatrix not positive definite";
        return pp;
      }
      double logdet = 0.0;
      for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
      pd.w = llt.solve(Eigen::MatrixXd::Identity(d, d));
      pd.lognorm = -0.5 * d * kLog2Pi - 0.5 * logdet;
      pd.scatter = Eigen::MatrixXd::Zero(K, K);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) pd.scatter(pd.idx[i], pd.idx[j]) = pd.w(i, j);
      pp.patterns[key] = std::move(pd);
    }
    return pp;
  }

  double eval_subject(const SubjectCache& sc, const PreparedParams& pp) const {
    // Residual bases r0_j = M_j - beta X_j.
    Eigen::MatrixXd r0 = sc.m - sc.x * pp.beta_t;

    // Combine the Gaussian-in-a factors exactly: precision, linear and
    // scalar pieces of exp(-0.5 a'Pa + b'a - 0.5 q).
    Eigen::MatrixXd prec = pp.inv_sigma_a;
    double nconst = -0.5 * pp.logdet_sigma_a;
    double q0 = 0.0;
    Eigen::VectorXd b0 = Eigen::VectorXd::Zero(K);
    auto accumulate_visit = [&](int j, const Eigen::VectorXd& w_full) {
      auto it = pp.patterns.find(sc.pattern[j]);
      if (it == pp.patterns.end()) return;  // nothing observed
      const PatternData& pd = it->second;
      const int d = static_cast<int>(pd.idx.size());
      Eigen::VectorXd wo(d);
      for (int i = 0; i < d; ++i) wo[i] = w_full[pd.idx[i]];
      Eigen::VectorXd y = pd.w * wo;
      q0 += wo.dot(y);
      for (int i = 0; i < d; ++i) b0[pd.idx[i]] += sc.z[j] * y[i];
      nconst += pd.lognorm;
    };
    for (int j : sc.phase1) {
      accumulate_visit(j, r0.row(j));
      auto it = pp.patterns.find(sc.pattern[j]);
      if (it != pp.patterns.end())
        prec += sc.z[j] * sc.z[j] * it->second.scatter;
    }
    for (int j : sc.phase2) {
      auto it = pp.patterns.find(sc.pattern[j]);
      if (it != pp.patterns.end())
        prec += sc.z[j] * sc.z[j] * it->second.scatter;
    }

    Eigen::LLT<Eigen::MatrixXd> llt_prec(prec);
    if (llt_prec.info() != Eigen::Success) return kNegInf;
    double logdet_prec = 0.0;
    for (int i = 0; i < K; ++i)
      logdet_prec += 2.0 * std::log(llt_prec.matrixL()(i, i));
    nconst -= 0.5 * logdet_prec;
    Eigen::MatrixXd cov_f = llt_prec.solve(Eigen::MatrixXd::Identity(K, K));
    Eigen::MatrixXd chol_f = Eigen::LLT<Eigen::MatrixXd>(cov_f).matrixL();

    // Hazard pieces free of a: step multipliers and baseline increments up
    // to V (whole segments; V is always a segment boundary).
    double base_v = 0.0;
    double lam_cum_v = basis.cumulative(pp.alpha, sc.V);
    {
      double lam_lo = basis.cumulative(pp.alpha, 0.0);
      for (int s = 0; s < sc.v_boundary; ++s) {
        double lam_hi = basis.cumulative(pp.alpha, sc.seg_bound[s + 1]);
        double d = lam_hi - lam_lo;
        if (d > 0.0) {
          if (sc.seg_hm_missing[s])
            throw std::runtime_error(
                "likelihood: no observed marker value available for hazard of "
                "subject " + sc.id);
          double c = pp.theta_x.dot(sc.seg_hx.row(s)) +
                     pp.theta_m.dot(sc.seg_hm.row(s));
          base_v += std::exp(c) * d;
        }
        lam_lo = lam_hi;
      }
    }

    // Gauss-Hermite pieces in standardized coordinates.
    Eigen::VectorXd v = std::sqrt(2.0) * (chol_f.transpose() * pp.theta_a);
    Eigen::ArrayXd d_shift = (gh_u * v).array();
    Eigen::ArrayXd e_shift = d_shift.exp();

    if (sc.delta == 0) {
      Eigen::VectorXd mu = llt_prec.solve(b0);
      double log_c = nconst + 0.5 * b0.dot(mu) - 0.5 * q0;
      double s_lin = pp.theta_a.dot(mu);
      double k_surv = base_v > 0.0 ? std::exp(s_lin) * base_v : 0.0;
      double val = log_c + logsumexp(gh_logw - k_surv * e_shift);
      return std::isnan(val) ? kNegInf : val;
    }

    // delta == 1: Gauss-Legendre over the bracket.
    const int seg_v = sc.v_boundary;  // segment (V, next] left values
    if (sc.seg_hm_missing[seg_v])
      throw std::runtime_error(
          "likelihood: no observed marker value available for hazard of "
          "subject " + sc.id);
    double c_v = pp.theta_x.dot(sc.seg_hx.row(seg_v)) +
                 pp.theta_m.dot(sc.seg_hm.row(seg_v));
    double width = sc.U - sc.V;
    Eigen::ArrayXd contrib(gl01.nodes.size());
    Eigen::ArrayXd lwd = gh_logw + d_shift;
    Eigen::ArrayXd y(gh_logw.size());
    Eigen::VectorXd w_full(K), b(K), mu(K);
    for (Eigen::Index q = 0; q < gl01.nodes.size(); ++q) {
      double t = sc.V + width * gl01.nodes[q];
      double log_wt = std::log(width * gl01.weights[q]);
      // phase-2 contribution at candidate change point t
      b = b0;
      double qq = q0;
      double ncq = nconst;
      for (int j : sc.phase2) {
        auto it = pp.patterns.find(sc.pattern[j]);
        if (it == pp.patterns.end()) continue;
        const PatternData& pd = it->second;
        const int d = static_cast<int>(pd.idx.size());
        double gshift = apply_g(ctx.changepoint_g, sc.times[j] - t);
        Eigen::VectorXd wo(d);
        for (int i = 0; i < d; ++i)
          wo[i] = r0(j, pd.idx[i]) - pp.gamma[pd.idx[i]] * gshift;
        Eigen::VectorXd yv = pd.w * wo;
        qq += wo.dot(yv);
        for (int i = 0; i < d; ++i) b[pd.idx[i]] += sc.z[j] * yv[i];
        ncq += pd.lognorm;
      }
      mu = llt_prec.solve(b);
      double log_c = ncq + 0.5 * b.dot(mu) - 0.5 * qq;
      double s_lin = pp.theta_a.dot(mu);
      double lam_cum_t = basis.cumulative(pp.alpha, t);
      double base_t = base_v;
      double dl = lam_cum_t - lam_cum_v;
      if (dl > 0.0) base_t += std::exp(c_v) * dl;
      double lam0 = std::max(0.0, basis.derivative(pp.alpha, t));
      double k_surv = base_t > 0.0 ? std::exp(s_lin) * base_t : 0.0;
      y = lwd - k_surv * e_shift;
      double lse = logsumexp(y);
      contrib[q] = log_wt + (lam0 > 0.0 ? std::log(lam0) : kNegInf) + c_v +
                   log_c + s_lin + lse;
    }
    double val = logsumexp(contrib);
    return std::isnan(val) ? kNegInf : val;
  }
};

LikEvaluator::LikEvaluator(const Dataset& dataset, const LikContext& ctx)
    : impl_(std::make_unique<Impl>(dataset, ctx)) {}

LikEvaluator::~LikEvaluator() = default;
LikEvaluator::LikEvaluator(LikEvaluator&&) noexcept = default;

int LikEvaluator::n_subjects() const {
  return static_cast<int>(impl_->cache.size());
}

const LikContext& LikEvaluator::context() const { return impl_->ctx; }

Eigen::VectorXd LikEvaluator::per_subject(const Parameters& params) const {
  const int n = n_subjects();
  PreparedParams pp = impl_->prepare(params);
  Eigen::VectorXd out(n);
  if (pp.bad) {
    out.setConstant(kNegInf);
    return out;
  }
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t i) { out[static_cast<Eigen::Index>(i)] =
                               impl_->eval_subject(impl_->cache[i], pp); },
      impl_->ctx.threads);
  return out;
}

Eigen::VectorXd LikEvaluator::per_subject(
    const Parameters& params, const std::vector<int>& subject_idx) const {
  PreparedParams pp = impl_->prepare(params);
  Eigen::VectorXd out(static_cast<Eigen::Index>(subject_idx.size()));
  if (pp.bad) {
    out.setConstant(kNegInf);
    return out;
  }
  // Duplicates in a bootstrap resample share one evaluation.
  std::vector<int> unique_ids(impl_->cache.size(), -1);
  std::vector<int> order;
  for (int id : subject_idx)
    if (unique_ids[id] < 0) {
      unique_ids[id] = static_cast<int>(order.size());
      order.push_back(id);
    }
  Eigen::VectorXd vals(static_cast<Eigen::Index>(order.size()));
  parallel_for(
      order.size(),
      [&](std::size_t i) {
        vals[static_cast<Eigen::Index>(i)] =
            impl_->eval_subject(impl_->cache[order[i]], pp);
      },
      impl_->ctx.threads);
  for (std::size_t i = 0; i < subject_idx.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = vals[unique_ids[subject_idx[i]]];
  return out;
}

double LikEvaluator::subject_value(int index, const Parameters& params) const {
  PreparedParams pp = impl_->prepare(params);
  if (pp.bad) return kNegInf;
  return impl_->eval_subject(impl_->cache[index], pp);
}

double LikEvaluator::total(const Parameters& params) const {
  return compensated_sum(per_subject(params));
}

double LikEvaluator::total_report(const Parameters& params,
                                  std::string* diagnostic) const {
  PreparedParams pp = impl_->prepare(params);
  if (pp.bad) {
    if (diagnostic) *diagnostic = pp.diagnostic;
    return kNegInf;
  }
  Eigen::VectorXd vals = per_subject(params);
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    if (!std::isfinite(vals[i])) {
      if (diagnostic)
        *diagnostic = "log-likelihood is -inf for subject " + impl_->cache[i].id;
      return kNegInf;
    }
  return compensated_sum(vals);
}

double subject_loglik(const Subject& subject, const Parameters& params,
                      const LikContext& ctx) {
  Dataset tiny;
  tiny.subjects = {subject};
  tiny.panel_dim = params.panel_dim();
  tiny.fixed_dim = params.fixed_dim();
  tiny.hazard_dim = params.hazard_dim();
  tiny.re_dim = subject.visits.empty()
                    ? 1
                    : static_cast<int>(subject.visits.front().covariates_z.size());
  tiny.hazard_cols = ctx.hazard_cols;
  LikEvaluator eval(tiny, ctx);
  return eval.per_subject(params)[0];
}

Eigen::VectorXd per_subject_loglik(const Dataset& dataset,
                                   const Parameters& params,
                                   const LikContext& ctx) {
  LikEvaluator eval(dataset, ctx);
  return eval.per_subject(params);
}

double total_loglik(const Dataset& dataset, const Parameters& params,
                    const LikContext& ctx) {
  LikEvaluator eval(dataset, ctx);
  return eval.total(params);
}

}  // namespace chronofit
