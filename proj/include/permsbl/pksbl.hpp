#pragma once

// P-KSBL: sparse Bayesian learning for AR(1)-correlated columns, with a
// Kalman smoother E-step and unknown row permutations.

#include "permsbl/em.hpp"
#include "permsbl/kalman.hpp"
#include "permsbl/model.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace permsbl {

/// Diagonals of the expected sufficient statistics entering the gamma update:
///   j = 0:  Sigma_{1|M} + x_{1|M} x_{1|M}^T
///   j >= 1: E[(x_j - rho x_{j-1})(x_j - rho x_{j-1})^T | Y]
/// Only diagonals are kept since Gamma is diagonal. Entries are floored at 0.
struct SmoothedMoments {
  std::vector<Eigen::VectorXd> diag;
};

SmoothedMoments smoothed_moments(const KalmanState& state, double rho);

/// gamma(l) = (1/M) (sum_{j>=1} M_j(l,l) / (1 - rho^2) + M_0(l,l)), floored.
/// Throws ConfigError for rho >= 1, where the update is undefined.
HyperParams update_gamma_ar(const SmoothedMoments& moments, double rho, double floor_eps = kDefaultFloorEps);
HyperParams update_gamma_ar(const KalmanState& state, double rho, double floor_eps = kDefaultFloorEps);

/// Time steps for observations y_m = P_m Phi_m x_m + n_m.
std::vector<KalmanStep> observation_steps(const Eigen::MatrixXd& y, const MeasurementMatrix& phi,
                                          std::span<const PermutationMap> perms);

/// Full EM. The permutation update uses the filtered means x_{m|m} unless
/// opts.perm_from_smoothed is set; x_hat holds the smoothed means. Requires
/// 0 <= opts.rho < 1.
SolverResult run_pksbl(const Eigen::MatrixXd& y, const MeasurementMatrix& phi, std::span<const AnchorMap> anchors,
                       const SolverOptions& opts);

}  // namespace permsbl
