#include "chronofit/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "chronofit/parallel.hpp"

namespace chronofit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

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
  double total = sum + comp;
  return std::isnan(total) ? kNegInf : total;
}

}  // namespace

Eigen::MatrixXd fd_score(const PerSubjectFn& fn, const Eigen::VectorXd& x,
                         double delta, int threads) {
  if (!(delta > 0.0)) throw std::invalid_argument("fd_score: delta must be > 0");
  const Eigen::Index p = x.size();
  const Eigen::Index n = fn(x).size();
  Eigen::MatrixXd scores(n, p);
  parallel_for(
      static_cast<std::size_t>(p),
      [&](std::size_t ui) {
        const Eigen::Index u = static_cast<Eigen::Index>(ui);
        double h = delta * std::max(1.0, std::abs(x[u]));
        for (int attempt = 0;; ++attempt) {
          Eigen::VectorXd xp = x, xm = x;
          xp[u] += h;
          xm[u] -= h;
          Eigen::VectorXd fp = fn(xp);
          Eigen::VectorXd fm = fn(xm);
          if (fp.allFinite() && fm.allFinite()) {
            scores.col(u) = (fp - fm) / (xp[u] - xm[u]);
            return;
          }
          if (attempt >= 3)
            throw std::runtime_error(
                "fd_score: non-finite likelihood at perturbed point, "
                "coordinate " + std::to_string(u));
          h *= 0.1;
        }
      },
      threads);
  return scores;
}

Eigen::MatrixXd empirical_info(const Eigen::MatrixXd& scores) {
  return scores.transpose() * scores;
}

Eigen::MatrixXd generalized_inverse(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("generalized_inverse: matrix not square");
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("generalized_inverse: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd& ev = es.eigenvalues();
  double cutoff = tol * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) > cutoff) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

ScoringResult fisher_scoring(const PerSubjectFn& fn, const Eigen::VectorXd& init,
                             const FitOptions& opts) {
  if (!init.allFinite())
    throw std::invalid_argument("fisher_scoring: non-finite initial point");
  ScoringResult res;
  res.x = init;
  double ll = compensated_sum(fn(res.x));
  if (!std::isfinite(ll))
    throw std::runtime_error("fisher_scoring: -inf log-likelihood at the "
                             "initial point");
  res.loglik_trace.push_back(ll);

  auto rel_change = [](const Eigen::VectorXd& from, const Eigen::VectorXd& to) {
    double worst = 0.0;
    for (Eigen::Index u = 0; u < from.size(); ++u)
      worst = std::max(worst, std::abs(to[u] - from[u]) /
                                  std::max(std::abs(from[u]), 1e-8));
    return worst;
  };

  for (int it = 0; it < opts.max_iter; ++it) {
    Eigen::MatrixXd scores = fd_score(fn, res.x, opts.fd_delta, opts.threads);
    Eigen::VectorXd g = scores.colwise().sum();
    res.final_score_norm = g.cwiseAbs().maxCoeff();
    Eigen::MatrixXd info = empirical_info(scores);
    Eigen::VectorXd dir = generalized_inverse(info, opts.pinv_tol) * g;
    res.iterations = it + 1;

    // A negligible full step means we are already at a stationary point.
    if (rel_change(res.x, res.x + dir) < opts.rel_tol) {
      double ll_try = compensated_sum(fn(res.x + dir));
      if (ll_try > ll) {
        res.x += dir;
        res.loglik_trace.push_back(ll_try);
      }
      res.converged = true;
      return res;
    }

    double eta = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      Eigen::VectorXd trial = res.x + eta * dir;
      double ll_try = compensated_sum(fn(trial));
      if (ll_try > ll) {
        bool small = rel_change(res.x, trial) < opts.rel_tol;
        res.x = trial;
        ll = ll_try;
        res.loglik_trace.push_back(ll);
        accepted = true;
        if (small) {
          res.converged = true;
          return res;
        }
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      res.converged = false;  // line search exhausted
      return res;
    }
  }
  res.converged = false;  // max_iter reached
  return res;
}

namespace {

FitResult fit_impl(const LikEvaluator& eval, const std::vector<int>* idx,
                   const Parameters& init, const FitOptions& opts) {
  const int q_n = init.basis_count();
  const int K = init.panel_dim();
  const int p = init.fixed_dim();
  const int p_s = init.hazard_dim();
  PerSubjectFn fn = [&](const Eigen::VectorXd& packed) {
    Parameters params = unpack(packed, q_n, K, p, p_s);
    return idx ? eval.per_subject(params, *idx) : eval.per_subject(params);
  };
  ScoringResult sr = fisher_scoring(fn, pack(init), opts);
  FitResult out;
  out.params_hat = unpack(sr.x, q_n, K, p, p_s);
  out.loglik_trace = std::move(sr.loglik_trace);
  out.iterations = sr.iterations;
  out.converged = sr.converged;
  out.final_score_norm = sr.final_score_norm;
  return out;
}

}  // namespace

FitResult fisher_scoring_fit(const LikEvaluator& eval, const Parameters& init,
                             const FitOptions& opts) {
  return fit_impl(eval, nullptr, init, opts);
}

FitResult fisher_scoring_fit(const LikEvaluator& eval,
                             const std::vector<int>& subject_idx,
                             const Parameters& init, const FitOptions& opts) {
  return fit_impl(eval, &subject_idx, init, opts);
}

FitResult fisher_scoring_fit(const Dataset& dataset, const Parameters& init,
                             const LikContext& ctx, const FitOptions& opts) {
  LikEvaluator eval(dataset, ctx);
  return fit_impl(eval, nullptr, init, opts);
}

}  // namespace chronofit
