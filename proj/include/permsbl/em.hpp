#pragma once

// Types shared by the EM solvers.

#include "permsbl/model.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace permsbl {

inline constexpr double kDefaultFloorEps = 1e-12;

/// Prior variances gamma(l) of the signal rows, Gamma = diag(gamma).
struct HyperParams {
  Eigen::VectorXd gamma;
  double floor_eps = kDefaultFloorEps;

  static HyperParams ones(Index L, double floor_eps = kDefaultFloorEps);
  /// Clamp every entry to at least floor_eps.
  void apply_floor();
  /// Rows whose gamma exceeds both 1e3 * floor_eps and 1e-3 * max(gamma).
  /// EM drives unused rows toward zero only slowly, so an absolute threshold
  /// near the floor is not reached within a practical iteration budget.
  std::vector<Index> active_rows() const;
};

/// How the solver obtains its first permutation estimate.
enum class InitMode {
  // Run SBL on the anchored rows alone until gamma settles, then assign the
  // free rows with one permutation M-step.
  kAnchorWarmStart,
  // Anchors plus free observations paired with free sources in ascending
  // order; the joint iterations start right away.
  kAscendingCompletion,
};

enum class StopReason { kTolerance, kMaxIterations };

std::string_view to_string(StopReason reason);

struct SolverOptions {
  bool shared_perm = true;
  int max_iter = 500;
  double tol = 1e-6;
  double floor_eps = kDefaultFloorEps;
  bool anchors_enforced = true;
  InitMode init = InitMode::kAnchorWarmStart;
  int warmup_max_iter = 500;
  double sigma2 = 0.0;
  // Only read by the correlated-column solver.
  double rho = 0.0;
  bool perm_from_smoothed = false;

  void validate() const;
};

struct EMState {
  int iter = 0;  // joint gamma/permutation iterations
  HyperParams gamma;
  std::vector<PermutationMap> perms;
  // Log evidence at the parameters entering each joint iteration, plus one
  // final entry at the returned parameters.
  std::vector<double> log_evidence_trace;
  bool converged = false;
  StopReason reason = StopReason::kMaxIterations;

  int warmup_iters = 0;
  // Evidence of the anchored rows alone during warm start.
  std::vector<double> warmup_trace;
};

struct SolverResult {
  Eigen::MatrixXd x_hat;  // L x M
  EMState state;
};

}  // namespace permsbl
