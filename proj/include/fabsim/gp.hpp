#pragma once

#include <Eigen/Core>

#include "fabsim/rng.hpp"

namespace fabsim {

struct GpConfig {
  /// Per-dimension length scales; empty means 0.5 for every dimension.
  Eigen::VectorXd length_scales;
  double signal_variance = 1.0;
  double noise_variance = 1e-8;
  /// Refit length scales and signal variance by multi-start gradient
  /// ascent on the log marginal likelihood (needs >= 3 observations).
  bool refit_hyperparams = true;
  int refit_starts = 4;
  int refit_iters = 60;
};

/// Exact GP regression state with a cached Cholesky factorization.
struct GpState {
  Eigen::MatrixXd x;  // n x d inputs
  Eigen::VectorXd y;  // raw observations
  double y_mean = 0.0;
  Eigen::VectorXd ls;  // fitted per-dimension length scales
  double sf2 = 1.0;    // signal variance
  double sn2 = 1e-8;   // noise variance
  double jitter = 0.0;  // extra diagonal needed for positive definiteness
  Eigen::MatrixXd chol_l;  // lower Cholesky of K + (sn2 + jitter) I
  Eigen::VectorXd alpha;   // (K + (sn2 + jitter) I)^-1 (y - y_mean)
};

/// Matern-5/2 covariance with per-dimension length scales.
double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& length_scales, double signal_variance);

/// Throws InvalidInputError on size mismatch or empty data, NumericError
/// if the kernel matrix stays indefinite after jitter escalation.
GpState gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const GpConfig& config = {});

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;  // latent (noise-free) predictive variance
};
GpPrediction gp_posterior(const GpState& state, const Eigen::VectorXd& x);

double log_marginal_likelihood(const GpState& state);

namespace detail {
/// Centered-data log marginal likelihood; optionally fills the gradient
/// with respect to (log ls_0..log ls_{d-1}, log sf2). Exposed so the
/// analytic gradient can be validated against finite differences.
double lml_value_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& ls, double sf2, double sn2,
                      Eigen::VectorXd* grad);
}  // namespace detail

/// Closed-form expected improvement for maximization; >= 0, and exactly
/// max(0, mean - best) in the deterministic (zero variance) limit.
double expected_improvement(const GpState& state, const Eigen::VectorXd& x,
                            double best_y);

/// argmax of EI over [-1,1]^d: 1024 uniform candidates (drawn
/// candidate-major, dimension-minor) followed by deterministic coordinate
/// pattern refinement of the best 8. The result's EI is never below any
/// raw candidate's.
Eigen::VectorXd propose_next(const GpState& state, Rng& rng);

}  // namespace fabsim
