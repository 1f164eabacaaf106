#include "fabsim/gp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fabsim/errors.hpp"

namespace fabsim {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964091736687747;

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& ls, double sf2) {
  const long n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (long i = 0; i < n; ++i) {
    k(i, i) = sf2;
    for (long j = i + 1; j < n; ++j) {
      k(i, j) = matern52(x.row(i).transpose(), x.row(j).transpose(), ls, sf2);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

/// Cholesky of k + (sn2 + jitter) I, escalating jitter until positive
/// definite. Throws NumericError when escalation runs out.
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& k, double sn2,
                                double& jitter_out) {
  const double scale = std::max(k.diagonal().mean(), 1e-12);
  double jitter = 0.0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    Eigen::MatrixXd m = k;
    m.diagonal().array() += sn2 + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
      jitter_out = jitter;
      return llt.matrixL();
    }
    jitter = jitter == 0.0 ? 1e-12 * scale : jitter * 100.0;
  }
  throw NumericError("gp_fit: kernel matrix is not positive definite");
}

struct Factorized {
  Eigen::MatrixXd chol_l;
  Eigen::VectorXd alpha;
  double jitter = 0.0;
};

Factorized factorize(const Eigen::MatrixXd& x, const Eigen::VectorXd& yc,
                     const Eigen::VectorXd& ls, double sf2, double sn2) {
  Factorized f;
  const Eigen::MatrixXd k = kernel_matrix(x, ls, sf2);
  f.chol_l = robust_cholesky(k, sn2, f.jitter);
  f.alpha = f.chol_l.transpose().triangularView<Eigen::Upper>().solve(
      f.chol_l.triangularView<Eigen::Lower>().solve(yc));
  return f;
}

double lml_of(const Factorized& f, const Eigen::VectorXd& yc) {
  const long n = yc.size();
  return -0.5 * yc.dot(f.alpha) -
         f.chol_l.diagonal().array().log().sum() -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

// Hyperparameter vector is (log ls_0..log ls_{d-1}, log sf2).
Eigen::VectorXd clamp_theta(Eigen::VectorXd theta) {
  const long d = theta.size() - 1;
  for (long i = 0; i < d; ++i)
    theta[i] = std::clamp(theta[i], std::log(0.02), std::log(20.0));
  theta[d] = std::clamp(theta[d], std::log(1e-10), std::log(1e8));
  return theta;
}

}  // namespace

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& length_scales, double signal_variance) {
  double r2 = 0.0;
  for (long i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / length_scales[i];
    r2 += d * d;
  }
  const double r = std::sqrt(r2);
  const double s = kSqrt5 * r;
  return signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

namespace detail {

double lml_value_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& yc,
                      const Eigen::VectorXd& ls, double sf2, double sn2,
                      Eigen::VectorXd* grad) {
  const long n = x.rows();
  const long d = x.cols();
  const Factorized f = factorize(x, yc, ls, sf2, sn2);
  const double lml = lml_of(f, yc);
  if (!grad) return lml;

  // A = alpha alpha^T - K^-1; grad_j = 0.5 sum(A .* dK_j)
  Eigen::MatrixXd kinv = f.chol_l.transpose()
                             .triangularView<Eigen::Upper>()
                             .solve(f.chol_l.triangularView<Eigen::Lower>()
                                        .solve(Eigen::MatrixXd::Identity(n, n)));
  const Eigen::MatrixXd a_mat = f.alpha * f.alpha.transpose() - kinv;

  grad->setZero(d + 1);
  for (long p = 0; p < n; ++p)
    for (long q = 0; q < n; ++q) {
      double r2 = 0.0;
      for (long i = 0; i < d; ++i) {
        const double diff = (x(p, i) - x(q, i)) / ls[i];
        r2 += diff * diff;
      }
      const double r = std::sqrt(r2);
      const double e = std::exp(-kSqrt5 * r);
      const double common = sf2 * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * e;
      for (long i = 0; i < d; ++i) {
        const double diff = x(p, i) - x(q, i);
        const double dk = common * (diff * diff) / (ls[i] * ls[i]);
        (*grad)[i] += 0.5 * a_mat(p, q) * dk;
      }
      // dK/dlog sf2 is the noiseless kernel itself
      const double kf = sf2 * (1.0 + kSqrt5 * r + 5.0 * r2 / 3.0) * e;
      (*grad)[d] += 0.5 * a_mat(p, q) * kf;
    }
  return lml;
}

}  // namespace detail

GpState gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const GpConfig& config) {
  if (x.rows() == 0 || x.cols() == 0)
    throw InvalidInputError("gp_fit: empty input matrix");
  if (x.rows() != y.size())
    throw InvalidInputError("gp_fit: |X| != |y|");
  if (!(config.noise_variance >= 0.0))
    throw ConfigError("gp_fit: noise variance must be non-negative");

  const long d = x.cols();
  GpState state;
  state.x = x;
  state.y = y;
  state.y_mean = y.mean();
  state.sn2 = config.noise_variance;
  state.ls = config.length_scales.size() == d
                 ? config.length_scales
                 : Eigen::VectorXd::Constant(d, 0.5);
  if ((state.ls.array() <= 0.0).any())
    throw ConfigError("gp_fit: length scales must be positive");
  state.sf2 = config.signal_variance;
  if (!(state.sf2 > 0.0))
    throw ConfigError("gp_fit: signal variance must be positive");

  const Eigen::VectorXd yc = (y.array() - state.y_mean).matrix();

  if (config.refit_hyperparams && x.rows() >= 3) {
    // Multi-start gradient ascent in log space.
    const double var_y =
        std::max(yc.squaredNorm() / static_cast<double>(y.size()), 1e-8);
    std::vector<Eigen::VectorXd> starts;
    Eigen::VectorXd base(d + 1);
    base.head(d) = state.ls.array().log().matrix();
    base[d] = std::log(state.sf2);
    starts.push_back(base);
    if (config.refit_starts > 1) {
      Eigen::VectorXd t = base;
      t[d] = std::log(var_y);
      starts.push_back(t);
    }
    if (config.refit_starts > 2) {
      Eigen::VectorXd t = base;
      t.head(d).array() += std::log(0.3);
      t[d] = std::log(var_y);
      starts.push_back(t);
    }
    if (config.refit_starts > 3) {
      Eigen::VectorXd t = base;
      t.head(d).array() += std::log(3.0);
      t[d] = std::log(var_y);
      starts.push_back(t);
    }

    double best_f = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta = base;
    for (Eigen::VectorXd theta : starts) {
      theta = clamp_theta(theta);
      Eigen::VectorXd grad(d + 1);
      double f = detail::lml_value_grad(
          x, yc, theta.head(d).array().exp().matrix(), std::exp(theta[d]),
          state.sn2, &grad);
      double step = 0.1;
      for (int iter = 0; iter < config.refit_iters && step > 1e-6; ++iter) {
        const Eigen::VectorXd cand = clamp_theta(theta + step * grad);
        Eigen::VectorXd cand_grad(d + 1);
        const double cand_f = detail::lml_value_grad(
            x, yc, cand.head(d).array().exp().matrix(), std::exp(cand[d]),
            state.sn2, &cand_grad);
        if (cand_f > f) {
          theta = cand;
          f = cand_f;
          grad = cand_grad;
          step *= 1.2;
        } else {
          step *= 0.5;
        }
      }
      if (f > best_f) {
        best_f = f;
        best_theta = theta;
      }
    }
    state.ls = best_theta.head(d).array().exp().matrix();
    state.sf2 = std::exp(best_theta[d]);
  }

  const Factorized f = factorize(x, yc, state.ls, state.sf2, state.sn2);
  state.chol_l = f.chol_l;
  state.alpha = f.alpha;
  state.jitter = f.jitter;
  return state;
}

GpPrediction gp_posterior(const GpState& state, const Eigen::VectorXd& x) {
  const long n = state.x.rows();
  Eigen::VectorXd kstar(n);
  for (long i = 0; i < n; ++i)
    kstar[i] = matern52(x, state.x.row(i).transpose(), state.ls, state.sf2);
  const Eigen::VectorXd v =
      state.chol_l.triangularView<Eigen::Lower>().solve(kstar);
  GpPrediction out;
  out.mean = state.y_mean + kstar.dot(state.alpha);
  out.variance = std::max(0.0, state.sf2 - v.squaredNorm());
  return out;
}

double log_marginal_likelihood(const GpState& state) {
  const Eigen::VectorXd yc = (state.y.array() - state.y_mean).matrix();
  Factorized f;
  f.chol_l = state.chol_l;
  f.alpha = state.alpha;
  return lml_of(f, yc);
}

double expected_improvement(const GpState& state, const Eigen::VectorXd& x,
                            double best_y) {
  const GpPrediction p = gp_posterior(state, x);
  // deterministic limit: no exploration term
  if (p.variance <= 1e-10 * state.sf2) return std::max(0.0, p.mean - best_y);
  const double sigma = std::sqrt(p.variance);
  const double z = (p.mean - best_y) / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf =
      std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, (p.mean - best_y) * cdf + sigma * pdf);
}

Eigen::VectorXd propose_next(const GpState& state, Rng& rng) {
  const long d = state.x.cols();
  const double best_y = state.y.maxCoeff();

  const int n_candidates = 1024;
  std::vector<Eigen::VectorXd> candidates(n_candidates);
  for (int c = 0; c < n_candidates; ++c) {
    Eigen::VectorXd v(d);
    for (long i = 0; i < d; ++i) v[i] = rng.uniform(-1.0, 1.0);
    candidates[c] = v;
  }
  std::vector<std::pair<double, int>> scored(n_candidates);
  for (int c = 0; c < n_candidates; ++c)
    scored[c] = {expected_improvement(state, candidates[c], best_y), c};
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  Eigen::VectorXd best_x = candidates[scored[0].second];
  double best_ei = scored[0].first;
  const int n_refine = std::min(8, n_candidates);
  for (int k = 0; k < n_refine; ++k) {
    Eigen::VectorXd xk = candidates[scored[k].second];
    double ei = scored[k].first;
    double step = 0.25;
    int guard = 0;
    while (step >= 1e-3 && guard++ < 20000) {
      bool improved = false;
      for (long i = 0; i < d; ++i)
        for (double sgn : {1.0, -1.0}) {
          Eigen::VectorXd xt = xk;
          xt[i] = std::clamp(xk[i] + sgn * step, -1.0, 1.0);
          const double e = expected_improvement(state, xt, best_y);
          if (e > ei) {
            xk = xt;
            ei = e;
            improved = true;
          }
        }
      if (!improved) step *= 0.5;
    }
    if (ei > best_ei) {
      best_ei = ei;
      best_x = xk;
    }
  }
  return best_x;
}

}  // namespace fabsim
