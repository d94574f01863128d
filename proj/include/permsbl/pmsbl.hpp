#pragma once

// P-MSBL: sparse Bayesian learning for independent columns with unknown row
// permutations of the measurement matrix.

#include "permsbl/em.hpp"
#include "permsbl/model.hpp"

#include <Eigen/Dense>

#include <span>

namespace permsbl {

/// Gaussian posterior of one column x_m given y_m.
struct PosteriorStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

/// Posterior of x given y = P Phi x + n, computed through the N x N matrix
/// Lambda = sigma2 I + P Phi Gamma Phi^T P^T:
///   Sigma = Gamma - Gamma Phi^T P^T Lambda^{-1} P Phi Gamma
///   mu    = Gamma Phi^T P^T Lambda^{-1} y   (= Sigma Phi^T P^T y / sigma2)
/// Throws ConfigError for sigma2 <= 0 and NumericalError if Lambda cannot be
/// factored even with jitter.
PosteriorStats posterior(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::MatrixXd& phi,
                         const PermutationMap& perm, const HyperParams& hp, double sigma2);

/// gamma(l) = mean_m (Sigma_m(l,l) + mu_m(l)^2), floored.
HyperParams update_gamma(std::span<const PosteriorStats> stats, double floor_eps = kDefaultFloorEps);

/// log p(Y; gamma, P) = sum_m -1/2 (N log 2pi + log det Lambda_m + y_m^T Lambda_m^{-1} y_m).
double log_evidence(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi, std::span<const PermutationMap> perms,
                    const HyperParams& hp, double sigma2);

/// Full EM. `anchors` holds one map per column, or a single map reused for
/// every column. In shared mode all anchor maps must agree.
SolverResult run_pmsbl(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi, std::span<const AnchorMap> anchors,
                       const SolverOptions& opts);

}  // namespace permsbl
