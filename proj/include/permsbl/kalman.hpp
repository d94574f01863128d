#pragma once

// Kalman filter, Rauch-Tung-Striebel smoother and lag-one covariances for the
// AR(1) state model
//
//   x_m = rho x_{m-1} + u_m,   u_m ~ N(0, (1 - rho^2) Q),   x_0 ~ N(0, Q),
//   y_m = H_m x_m + n_m,       n_m ~ N(0, sigma2 I),
//
// with diagonal Q. The sparse-learning solver uses Q = Gamma and H_m = P_m Phi_m.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace permsbl {

using Index = Eigen::Index;

/// One time step: observation matrix H_m (n_m x d) and its observations.
struct KalmanStep {
  Eigen::MatrixXd obs_matrix;
  Eigen::VectorXd y;
};

struct KalmanState {
  // Forward pass, index m = 0..M-1.
  std::vector<Eigen::VectorXd> pred_mean;
  std::vector<Eigen::MatrixXd> pred_cov;
  std::vector<Eigen::VectorXd> filt_mean;
  std::vector<Eigen::MatrixXd> filt_cov;
  std::vector<Eigen::MatrixXd> gain;
  // Backward pass. smoother_gain[j] maps step j+1 to j (last entry empty).
  std::vector<Eigen::VectorXd> smooth_mean;
  std::vector<Eigen::MatrixXd> smooth_cov;
  std::vector<Eigen::MatrixXd> smoother_gain;
  // lag_one_cov[j] = Cov(x_j, x_{j-1} | all y) for j >= 1; entry 0 is empty.
  std::vector<Eigen::MatrixXd> lag_one_cov;

  double log_likelihood = 0.0;  // sum of innovation log densities
  bool regularized = false;     // a jittered solve was needed

  std::size_t steps() const { return filt_mean.size(); }
};

/// Forward recursions from x_{0|0} = 0, Sigma_{0|0} = diag(prior_var):
///   prediction  x_{m|m-1} = rho x_{m-1|m-1},
///               Sigma_{m|m-1} = rho^2 Sigma_{m-1|m-1} + (1 - rho^2) Q,
///   gain        G_m = Sigma_{m|m-1} H^T (sigma2 I + H Sigma_{m|m-1} H^T)^{-1},
///   update      x_{m|m} = x_{m|m-1} + G_m (y_m - H x_{m|m-1}),
///               Sigma_{m|m} = (I - G_m H) Sigma_{m|m-1}, symmetrized.
/// Steps with no observations skip the update.
KalmanState kalman_forward(std::span<const KalmanStep> steps, const Eigen::VectorXd& prior_var, double rho,
                           double sigma2);

/// Backward pass j = M-1..1 with J_{j-1} = rho Sigma_{j-1|j-1} Sigma_{j|j-1}^{-1}. A
/// singular prediction covariance is solved with 1e-10 * trace / d jitter and
/// sets `regularized`.
KalmanState rts_smooth(KalmanState state, double rho);

/// Smoothed lag-one covariances, seeded with
/// Sigma_{M,M-1|M} = rho (I - G_M H_M) Sigma_{M-1|M-1} and recursed backwards.
std::vector<Eigen::MatrixXd> lag_one_covariances(const KalmanState& state, std::span<const KalmanStep> steps,
                                                 double rho);

/// Forward pass, smoothing and lag-one covariances in one call.
KalmanState kalman_smoother(std::span<const KalmanStep> steps, const Eigen::VectorXd& prior_var, double rho,
                            double sigma2);

}  // namespace permsbl
