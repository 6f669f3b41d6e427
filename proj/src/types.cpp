#include "chronofit/types.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace chronofit {

Eigen::VectorXd Parameters::alpha() const {
  Eigen::VectorXd a(xi.size());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < xi.size(); ++j) {
    acc += std::exp(xi[j]);
    a[j] = acc;
  }
  return a;
}

Eigen::MatrixXd Parameters::chol_a_factor() const {
  Eigen::MatrixXd L = chol_a;
  for (Eigen::Index k = 0; k < L.rows(); ++k) L(k, k) = std::exp(L(k, k));
  return L;
}

Eigen::MatrixXd Parameters::chol_e_factor() const {
  Eigen::MatrixXd L = chol_e;
  for (Eigen::Index k = 0; k < L.rows(); ++k) L(k, k) = std::exp(L(k, k));
  return L;
}

Eigen::MatrixXd Parameters::sigma_a() const {
  Eigen::MatrixXd L = chol_a_factor();
  return L * L.transpose();
}

Eigen::MatrixXd Parameters::sigma_e() const {
  Eigen::MatrixXd L = chol_e_factor();
  return L * L.transpose();
}

Parameters Parameters::zeros(int q_n, int K, int p, int p_s) {
  Parameters out;
  out.xi = Eigen::VectorXd::Zero(q_n);
  out.beta = Eigen::MatrixXd::Zero(K, p);
  out.gamma = Eigen::VectorXd::Zero(K);
  out.theta_x = Eigen::VectorXd::Zero(p_s);
  out.theta_a = Eigen::VectorXd::Zero(K);
  out.theta_m = Eigen::VectorXd::Zero(K);
  out.chol_a = Eigen::MatrixXd::Zero(K, K);
  out.chol_e = Eigen::MatrixXd::Zero(K, K);
  return out;
}

int packed_size(int q_n, int K, int p, int p_s) {
  return q_n + K * p + K + p_s + K + K + K * (K + 1);  // two lower triangles
}

Eigen::VectorXd pack(const Parameters& params) {
  const int K = params.panel_dim();
  const int p = params.fixed_dim();
  Eigen::VectorXd out(packed_size(params.basis_count(), K, p, params.hazard_dim()));
  Eigen::Index at = 0;
  out.segment(at, params.xi.size()) = params.xi;
  at += params.xi.size();
  for (int k = 0; k < K; ++k) {
    out.segment(at, p) = params.beta.row(k);
    at += p;
  }
  out.segment(at, K) = params.gamma;
  at += K;
  out.segment(at, params.theta_x.size()) = params.theta_x;
  at += params.theta_x.size();
  out.segment(at, K) = params.theta_a;
  at += K;
  out.segment(at, K) = params.theta_m;
  at += K;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j <= i; ++j) out[at++] = params.chol_a(i, j);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j <= i; ++j) out[at++] = params.chol_e(i, j);
  return out;
}

Parameters unpack(const Eigen::VectorXd& packed, int q_n, int K, int p, int p_s) {
  if (packed.size() != packed_size(q_n, K, p, p_s))
    throw std::invalid_argument("unpack: packed vector has wrong length");
  Parameters out = Parameters::zeros(q_n, K, p, p_s);
  Eigen::Index at = 0;
  out.xi = packed.segment(at, q_n);
  at += q_n;
  for (int k = 0; k < K; ++k) {
    out.beta.row(k) = packed.segment(at, p);
    at += p;
  }
  out.gamma = packed.segment(at, K);
  at += K;
  out.theta_x = packed.segment(at, p_s);
  at += p_s;
  out.theta_a = packed.segment(at, K);
  at += K;
  out.theta_m = packed.segment(at, K);
  at += K;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j <= i; ++j) out.chol_a(i, j) = packed[at++];
  for (int i = 0; i < K; ++i)
    for (int j = 0; j <= i; ++j) out.chol_e(i, j) = packed[at++];
  return out;
}

std::vector<std::string> packed_names(int q_n, int K, int p, int p_s) {
  std::vector<std::string> names;
  names.reserve(packed_size(q_n, K, p, p_s));
  auto tag = [](const std::string& base, int i) {
    return base + std::to_string(i);
  };
  for (int j = 0; j < q_n; ++j) names.push_back(tag("xi", j + 1));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < p; ++j)
      names.push_back("beta" + std::to_string(j) + "_" + std::to_string(k + 1));
  for (int k = 0; k < K; ++k) names.push_back(tag("gamma", k + 1));
  for (int j = 0; j < p_s; ++j) names.push_back(tag("theta_x", j + 1));
  for (int k = 0; k < K; ++k) names.push_back(tag("theta_a", k + 1));
  for (int k = 0; k < K; ++k) names.push_back(tag("theta_m", k + 1));
  for (int i = 0; i < K; ++i)
    for (int j = 0; j <= i; ++j)
      names.push_back("chol_a_" + std::to_string(i + 1) + std::to_string(j + 1));
  for (int i = 0; i < K; ++i)
    for (int j = 0; j <= i; ++j)
      names.push_back("chol_e_" + std::to_string(i + 1) + std::to_string(j + 1));
  return names;
}

namespace {

bool is_visit_time(const Subject& s, double t) {
  for (const auto& v : s.visits)
    if (v.time == t) return true;
  return false;
}

}  // namespace

std::vector<Violation> validate(const Dataset& dataset) {
  std::vector<Violation> out;
  auto add = [&out](const std::string& id, const std::string& rule,
                    const std::string& detail) {
    out.push_back({id, rule, detail});
  };

  int n_events = 0;
  for (const auto& s : dataset.subjects) {
    if (s.visits.size() < 2)
      add(s.id, "min_visits", "subject has fewer than 2 visits");
    for (std::size_t j = 0; j < s.visits.size(); ++j) {
      const Visit& v = s.visits[j];
      if (v.time < 0.0) add(s.id, "nonnegative_time", "visit time < 0");
      if (v.markers.size() != dataset.panel_dim ||
          static_cast<int>(v.observed.size()) != dataset.panel_dim)
        add(s.id, "panel_dim", "marker vector/mask length != K");
      if (v.covariates_x.size() != dataset.fixed_dim)
        add(s.id, "fixed_dim", "covariates_x length != p");
      if (v.covariates_z.size() != dataset.re_dim)
        add(s.id, "re_dim", "covariates_z length != q_z");
      if (j > 0 && !(s.visits[j - 1].time < v.time)) {
        add(s.id, "increasing_times", "visit times not strictly increasing");
        break;
      }
    }
    if (!(s.bracket_v < s.bracket_u))
      add(s.id, "bracket_v < bracket_u", "V >= U");
    if (s.delta == 0) {
      if (!s.visits.empty() && s.bracket_v != s.visits.back().time)
        add(s.id, "censored_at_last_visit", "delta=0 but V != last visit time");
      if (std::isfinite(s.bracket_u))
        add(s.id, "censored_u_infinite", "delta=0 but U finite");
    } else if (s.delta == 1) {
      ++n_events;
      if (!is_visit_time(s, s.bracket_v) || !is_visit_time(s, s.bracket_u)) {
        add(s.id, "bracket_on_visits", "delta=1 but V or U is not a visit time");
      } else {
        for (const auto& v : s.visits) {
          if (v.time > s.bracket_v && v.time < s.bracket_u) {
            add(s.id, "adjacency", "visit strictly inside (V, U)");
            break;
          }
        }
      }
    } else {
      add(s.id, "delta_binary", "delta not in {0, 1}");
    }
  }
  if (n_events == 0)
    add("", "has_event", "no delta=1 subject; hazard not estimable");
  return out;
}

}  // namespace chronofit
