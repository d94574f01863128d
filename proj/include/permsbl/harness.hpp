#pragma once

// Seeded Monte Carlo trials and parameter sweeps over the solvers.

#include "permsbl/em.hpp"
#include "permsbl/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace permsbl {

enum class Algorithm { kPmsblShared, kPmsblIndep, kPksbl, kSomp };

std::string_view to_string(Algorithm alg);
/// Accepts "pmsbl-shared", "pmsbl-indep", "pksbl", "somp". Throws ConfigError.
Algorithm parse_algorithm(std::string_view name);

/// Solver settings that are not part of the problem itself.
struct TrialOptions {
  int max_iter = 500;
  double tol = 1e-6;
  double floor_eps = kDefaultFloorEps;
  bool anchors_enforced = true;
  InitMode init = InitMode::kAnchorWarmStart;
  int warmup_max_iter = 500;
  bool perm_from_smoothed = false;
};

struct TrialResult {
  double nmse = 0.0;     // ||X_hat - X||_F^2 / ||X||_F^2
  double nmse_db = 0.0;  // 10 log10(nmse)
  bool perm_exact = false;
  double row_accuracy = 0.0;  // correctly mapped non-anchored rows, all columns
  int iters = 0;
  double wall_time = 0.0;  // seconds
  bool failed = false;
  std::string error;

  bool same_outcome(const TrialResult& other) const;
};

/// Permutation mode of the data an algorithm is evaluated on. The P-MSBL
/// variants fix it; P-KSBL and S-OMP follow `config.shared_perm`.
bool data_shared_perm(Algorithm alg, const ProblemConfig& config);

/// Scores an estimate against the generating instance.
TrialResult score_estimate(const ProblemInstance& inst, const Eigen::MatrixXd& x_hat,
                           const std::vector<PermutationMap>& perms);

/// Solves an existing instance with `alg` and scores the result. Solver
/// numerical errors produce a failed result rather than an exception.
TrialResult solve_instance(const ProblemInstance& inst, Algorithm alg, const TrialOptions& opts = {});

/// Generates the instance for (config, trial_seed) and solves it.
TrialResult run_trial(const ProblemConfig& config, Algorithm alg, std::uint64_t trial_seed,
                      const TrialOptions& opts = {});

enum class SweepAxis { kSnrDb, kAnchorFraction, kM };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_axis(std::string_view name);

struct SweepSpec {
  ProblemConfig base;
  SweepAxis axis = SweepAxis::kAnchorFraction;
  std::vector<double> values;
  std::vector<Algorithm> algorithms;
  int trials = 200;
  std::uint64_t master_seed = 1;
  TrialOptions options;

  void validate() const;
  /// `base` with the axis value applied; the seed is left untouched.
  ProblemConfig config_at(double value) const;
};

struct SweepRow {
  std::string axis;
  std::string algorithm;
  double value = 0.0;
  double nmse_db = 0.0;       // mean over successful trials
  double success_rate = 0.0;  // mean perm_exact
  double row_accuracy = 0.0;
  int trials = 0;
  int failures = 0;

  bool operator==(const SweepRow&) const = default;
};
using SweepTable = std::vector<SweepRow>;

/// Per-trial outcomes of one sweep cell, indexed by trial number.
struct SweepCell {
  double value = 0.0;
  Algorithm algorithm = Algorithm::kPmsblShared;
  std::vector<TrialResult> trials;
};

struct SweepOutput {
  SweepTable table;
  std::vector<SweepCell> cells;
};

/// Runs every (value, algorithm, trial) combination on up to `workers`
/// threads. Trial t of every cell uses trial_seed(master_seed, t), so cells
/// see the same instances wherever the axis allows. Aggregation is in fixed
/// order, making the table independent of the worker count. Throws
/// FailureBudgetError when more than 1% of all trials fail.
SweepOutput run_sweep(const SweepSpec& spec, unsigned workers = 1);

SweepRow aggregate(std::string_view axis, Algorithm alg, double value, const std::vector<TrialResult>& trials);

inline constexpr std::string_view kCsvHeader =
    "axis,algorithm,value,nmse_db,success_rate,row_accuracy,trials,failures";

std::string format_csv(const SweepTable& table);
SweepTable parse_csv(std::string_view text);
void write_csv(const SweepTable& table, const std::filesystem::path& path);
SweepTable read_csv(const std::filesystem::path& path);

/// One whitespace-separated `<algorithm>.dat` file per curve in `dir`.
void emit_plot_data(const SweepTable& table, const std::filesystem::path& dir);

}  // namespace permsbl
