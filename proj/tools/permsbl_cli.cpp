// Command-line front end: instance generation, single solves, sweeps and
// plot-data export.

#include "permsbl/errors.hpp"
#include "permsbl/harness.hpp"
#include "permsbl/io.hpp"
#include "permsbl/pksbl.hpp"
#include "permsbl/pmsbl.hpp"
#include "permsbl/somp.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <thread>

namespace {

using namespace permsbl;

enum Exit { kOk = 0, kIoError = 1, kConfigError = 2, kNumericalError = 3 };

std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("PERMSBL_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == std::string(s).size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("PERMSBL_SEED is not an unsigned integer: ") + s);
}

struct SolveArgs {
  std::string in, out, alg;
  bool shared_perm = false;
  std::optional<double> rho;
  int max_iter = 500;
  double tol = 1e-6;
  double floor_eps = kDefaultFloorEps;
  std::string init = "anchor-warm-start";
};

int cmd_generate(const std::string& config_path, const std::string& out) {
  ProblemConfig c = config_from_json(read_json(config_path));
  if (auto seed = seed_from_env()) c.seed = *seed;
  write_json(instance_to_json(gen_problem(c)), out);
  return kOk;
}

int cmd_solve(const SolveArgs& a) {
  const ProblemInstance inst = instance_from_json(read_json(a.in));
  const Algorithm alg = parse_algorithm(a.alg);
  const auto anchors = inst.anchor_maps();

  bool shared = a.shared_perm || inst.config.shared_perm;
  if (alg == Algorithm::kPmsblShared) shared = true;
  if (alg == Algorithm::kPmsblIndep) shared = false;

  Eigen::MatrixXd x_hat;
  std::vector<PermutationMap> perms;
  std::optional<EMState> state;
  if (alg == Algorithm::kSomp) {
    auto res = run_somp(inst.y, inst.phi.entries, anchors, inst.config.K, shared);
    x_hat = std::move(res.x_hat);
    perms = std::move(res.perms_est);
  } else {
    SolverOptions opts;
    opts.shared_perm = shared;
    opts.max_iter = a.max_iter;
    opts.tol = a.tol;
    opts.floor_eps = a.floor_eps;
    opts.init = a.init == "ascending-completion" ? InitMode::kAscendingCompletion : InitMode::kAnchorWarmStart;
    opts.sigma2 = inst.sigma2;
    opts.rho = a.rho.value_or(inst.config.rho);
    auto res = alg == Algorithm::kPksbl ? run_pksbl(inst.y, inst.phi, anchors, opts)
                                        : run_pmsbl(inst.y, inst.phi.entries, anchors, opts);
    x_hat = std::move(res.x_hat);
    perms = res.state.perms;
    state = std::move(res.state);
  }
  const TrialResult score = score_estimate(inst, x_hat, perms);
  write_json(solve_output_to_json(a.alg, x_hat, perms, state ? &*state : nullptr, score), a.out);
  return kOk;
}

int cmd_sweep(const std::string& spec_path, const std::string& out, unsigned workers) {
  SweepSpec spec = sweep_spec_from_json(read_json(spec_path));
  if (auto seed = seed_from_env()) spec.master_seed = *seed;
  const SweepOutput result = run_sweep(spec, workers);
  write_csv(result.table, out);
  return kOk;
}

int cmd_plotdata(const std::string& in, const std::string& out) {
  SweepTable table;
  try {
    table = read_csv(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(in + ": " + e.what());
  }
  emit_plot_data(table, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Bayesian recovery with unknown sensor permutations"};
  app.require_subcommand(1);

  std::string config_path, gen_out;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic instance");
  gen->add_option("--config", config_path, "Problem config (JSON)")->required();
  gen->add_option("--out", gen_out, "Instance output (JSON)")->required();

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Solve one instance");
  solve->add_option("--in", sa.in, "Instance (JSON)")->required();
  solve->add_option("--alg", sa.alg, "pmsbl-shared, pmsbl-indep, pksbl or somp")->required();
  solve->add_flag("--shared-perm", sa.shared_perm, "Estimate one permutation for all columns");
  solve->add_option("--rho", sa.rho, "AR(1) coefficient (default: from the instance)");
  solve->add_option("--max-iter", sa.max_iter, "EM iterations")->capture_default_str();
  solve->add_option("--tol", sa.tol, "Relative gamma tolerance")->capture_default_str();
  solve->add_option("--floor-eps", sa.floor_eps, "Lower bound on gamma")->capture_default_str();
  solve->add_option("--init", sa.init, "anchor-warm-start or ascending-completion")
      ->check(CLI::IsMember({"anchor-warm-start", "ascending-completion"}))
      ->capture_default_str();
  solve->add_option("--out", sa.out, "Result (JSON)")->required();

  std::string spec_path, sweep_out;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  auto* sweep = app.add_subcommand("sweep", "Run a Monte Carlo sweep");
  sweep->add_option("--spec", spec_path, "Sweep spec (JSON)")->required();
  sweep->add_option("--out", sweep_out, "Aggregated table (CSV)")->required();
  sweep->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  std::string plot_in, plot_out;
  auto* plot = app.add_subcommand("plotdata", "Split a sweep table into per-curve data files");
  plot->add_option("--in", plot_in, "Sweep table (CSV)")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) return cmd_generate(config_path, gen_out);
    if (*solve) return cmd_solve(sa);
    if (*sweep) return cmd_sweep(spec_path, sweep_out, workers);
    if (*plot) return cmd_plotdata(plot_in, plot_out);
  } catch (const FailureBudgetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {  // ConfigError, InvalidAnchorError
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}
