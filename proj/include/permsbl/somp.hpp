#pragma once

// Simultaneous orthogonal matching pursuit on the anchored rows, followed by a
// single permutation step. Baseline for the EM solvers.

#include "permsbl/model.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace permsbl {

struct SompFit {
  std::vector<Index> support;  // in selection order
  Eigen::MatrixXd x_hat;       // L x M, zero off the support
  bool rank_deficient = false;  // a minimum-norm solve was used
};

struct SompResult {
  std::vector<Index> support_est;
  Eigen::MatrixXd x_hat;
  std::vector<PermutationMap> perms_est;
};

/// Greedy S-OMP. Each step picks the atom maximizing sum_m |<r_m, a_l>| / ||a_l||,
/// refits every column by least squares on the support and updates the
/// residuals. Stops after min(k_max, B) atoms or when every residual is zero.
SompFit somp_recover(const Eigen::MatrixXd& y_anchor, const Eigen::MatrixXd& phi_anchor, Index k_max);

/// Same with one dictionary per column (columns with different anchor sources).
SompFit somp_recover(const Eigen::MatrixXd& y_anchor, std::span<const Eigen::MatrixXd> phi_anchor, Index k_max);

/// One permutation M-step from a fixed estimate. Shared mode starts from the
/// ascending completion of the anchors as incumbent.
std::vector<PermutationMap> one_shot_perm(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi,
                                          const Eigen::MatrixXd& x_hat, std::span<const AnchorMap> anchors,
                                          bool shared_perm);

/// S-OMP on the anchored rows of every column, then one_shot_perm.
SompResult run_somp(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi, std::span<const AnchorMap> anchors,
                    Index k_max, bool shared_perm);

}  // namespace permsbl
