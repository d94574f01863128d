#include "permsbl/harness.hpp"

#include "permsbl/errors.hpp"
#include "permsbl/pksbl.hpp"
#include "permsbl/pmsbl.hpp"
#include "permsbl/somp.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace permsbl {

std::string_view to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::kPmsblShared: return "pmsbl-shared";
    case Algorithm::kPmsblIndep: return "pmsbl-indep";
    case Algorithm::kPksbl: return "pksbl";
    case Algorithm::kSomp: return "somp";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto alg : {Algorithm::kPmsblShared, Algorithm::kPmsblIndep, Algorithm::kPksbl, Algorithm::kSomp})
    if (to_string(alg) == name) return alg;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kSnrDb: return "snr_db";
    case SweepAxis::kAnchorFraction: return "anchor_fraction";
    case SweepAxis::kM: return "M";
  }
  return "unknown";
}

SweepAxis parse_axis(std::string_view name) {
  for (auto axis : {SweepAxis::kSnrDb, SweepAxis::kAnchorFraction, SweepAxis::kM})
    if (to_string(axis) == name) return axis;
  throw ConfigError("unknown sweep axis '" + std::string(name) + "'");
}

bool TrialResult::same_outcome(const TrialResult& o) const {
  return nmse == o.nmse && perm_exact == o.perm_exact && row_accuracy == o.row_accuracy && iters == o.iters &&
         failed == o.failed;
}

bool data_shared_perm(Algorithm alg, const ProblemConfig& config) {
  switch (alg) {
    case Algorithm::kPmsblShared: return true;
    case Algorithm::kPmsblIndep: return false;
    default: return config.shared_perm;
  }
}

TrialResult score_estimate(const ProblemInstance& inst, const Eigen::MatrixXd& x_hat,
                           const std::vector<PermutationMap>& perms) {
  TrialResult r;
  const auto& x = inst.x_true.entries;
  r.nmse = (x_hat - x).squaredNorm() / x.squaredNorm();
  r.nmse_db = 10.0 * std::log10(std::max(r.nmse, std::numeric_limits<double>::min()));

  const Index N = inst.config.N;
  const Index free = N - static_cast<Index>(inst.anchors.size());
  Index correct = 0, total = 0;
  r.perm_exact = true;
  for (std::size_t m = 0; m < perms.size(); ++m) {
    if (!(perms[m] == inst.perms_true[m])) r.perm_exact = false;
    for (Index i = static_cast<Index>(inst.anchors.size()); i < N; ++i) {
      ++total;
      if (perms[m].source(i) == inst.perms_true[m].source(i)) ++correct;
    }
  }
  r.row_accuracy = free == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

TrialResult solve_instance(const ProblemInstance& inst, Algorithm alg, const TrialOptions& topts) {
  const auto start = std::chrono::steady_clock::now();
  const auto anchors = inst.anchor_maps();
  const bool shared = alg == Algorithm::kPmsblShared || (alg != Algorithm::kPmsblIndep && inst.config.shared_perm);

  TrialResult r;
  try {
    if (alg == Algorithm::kSomp) {
      const auto res = run_somp(inst.y, inst.phi.entries, anchors, inst.config.K, shared);
      r = score_estimate(inst, res.x_hat, res.perms_est);
    } else {
      SolverOptions opts;
      opts.shared_perm = shared;
      opts.max_iter = topts.max_iter;
      opts.tol = topts.tol;
      opts.floor_eps = topts.floor_eps;
      opts.anchors_enforced = topts.anchors_enforced;
      opts.init = topts.init;
      opts.warmup_max_iter = topts.warmup_max_iter;
      opts.sigma2 = inst.sigma2;
      opts.rho = inst.config.rho;
      opts.perm_from_smoothed = topts.perm_from_smoothed;
      const auto res = alg == Algorithm::kPksbl ? run_pksbl(inst.y, inst.phi, anchors, opts)
                                                : run_pmsbl(inst.y, inst.phi.entries, anchors, opts);
      r = score_estimate(inst, res.x_hat, res.state.perms);
      r.iters = res.state.iter + res.state.warmup_iters;
    }
  } catch (const NumericalError& e) {
    r = TrialResult{};
    r.failed = true;
    r.error = e.what();
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

TrialResult run_trial(const ProblemConfig& config, Algorithm alg, std::uint64_t seed, const TrialOptions& opts) {
  ProblemConfig c = config;
  c.seed = seed;
  c.shared_perm = data_shared_perm(alg, config);
  return solve_instance(gen_problem(c), alg, opts);
}

void SweepSpec::validate() const {
  base.validate();
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (algorithms.empty()) throw ConfigError("sweep needs at least one algorithm");
  if (values.empty()) throw ConfigError("sweep needs at least one axis value");
  for (double v : values)
    if (!std::isfinite(v)) throw ConfigError("axis values must be finite");
  if (!std::is_sorted(values.begin(), values.end())) throw ConfigError("axis values must be sorted");
  for (double v : values) config_at(v).validate();
}

ProblemConfig SweepSpec::config_at(double value) const {
  ProblemConfig c = base;
  switch (axis) {
    case SweepAxis::kSnrDb: c.snr_db = value; break;
    case SweepAxis::kAnchorFraction: c.anchor_fraction = value; break;
    case SweepAxis::kM:
      if (value != std::floor(value)) throw ConfigError("M axis values must be integers");
      c.M = static_cast<Index>(value);
      break;
  }
  return c;
}

SweepRow aggregate(std::string_view axis, Algorithm alg, double value, const std::vector<TrialResult>& trials) {
  SweepRow row;
  row.axis = std::string(axis);
  row.algorithm = std::string(to_string(alg));
  row.value = value;
  row.trials = static_cast<int>(trials.size());
  double nmse = 0.0, success = 0.0, accuracy = 0.0;
  int ok = 0;
  for (const auto& t : trials) {
    if (t.failed) {
      ++row.failures;
      continue;
    }
    ++ok;
    nmse += t.nmse_db;
    success += t.perm_exact ? 1.0 : 0.0;
    accuracy += t.row_accuracy;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.nmse_db = ok ? nmse / ok : nan;
  row.success_rate = ok ? success / ok : nan;
  row.row_accuracy = ok ? accuracy / ok : nan;
  return row;
}

SweepOutput run_sweep(const SweepSpec& spec, unsigned workers) {
  spec.validate();
  SweepOutput out;
  for (double v : spec.values)
    for (auto alg : spec.algorithms)
      out.cells.push_back({v, alg, std::vector<TrialResult>(static_cast<std::size_t>(spec.trials))});

  const std::size_t per_cell = static_cast<std::size_t>(spec.trials);
  const std::size_t jobs = out.cells.size() * per_cell;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      auto& cell = out.cells[job / per_cell];
      const std::size_t t = job % per_cell;
      cell.trials[t] = run_trial(spec.config_at(cell.value), cell.algorithm, trial_seed(spec.master_seed, t),
                                 spec.options);
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  std::size_t failures = 0;
  for (const auto& cell : out.cells) {
    out.table.push_back(aggregate(to_string(spec.axis), cell.algorithm, cell.value, cell.trials));
    failures += static_cast<std::size_t>(out.table.back().failures);
  }
  if (failures * 100 > jobs)
    throw FailureBudgetError(std::to_string(failures) + " of " + std::to_string(jobs) +
                             " trials failed (budget 1%)");
  return out;
}

namespace {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("malformed number '" + s + "'");
  return v;
}

}  // namespace

std::string format_csv(const SweepTable& table) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : table) {
    out += r.axis + ',' + r.algorithm + ',' + format_number(r.value) + ',' + format_number(r.nmse_db) + ',' +
           format_number(r.success_rate) + ',' + format_number(r.row_accuracy) + ',' + std::to_string(r.trials) +
           ',' + std::to_string(r.failures) + '\n';
  }
  return out;
}

SweepTable parse_csv(std::string_view text) {
  SweepTable table;
  bool header = true;
  for (const auto& raw : split(text, '\n')) {
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      if (line != kCsvHeader) throw std::invalid_argument("unexpected CSV header");
      header = false;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 8) throw std::invalid_argument("CSV row must have 8 fields");
    SweepRow r;
    r.axis = f[0];
    r.algorithm = f[1];
    r.value = parse_number(f[2]);
    r.nmse_db = parse_number(f[3]);
    r.success_rate = parse_number(f[4]);
    r.row_accuracy = parse_number(f[5]);
    r.trials = std::stoi(f[6]);
    r.failures = std::stoi(f[7]);
    table.push_back(std::move(r));
  }
  if (header) throw std::invalid_argument("missing CSV header");
  return table;
}

void write_csv(const SweepTable& table, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  os << format_csv(table);
  if (!os) throw std::ios_base::failure("write to " + path.string() + " failed");
}

SweepTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::ios_base::failure("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_csv(ss.str());
}

void emit_plot_data(const SweepTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<std::string, std::vector<const SweepRow*>> curves;
  for (const auto& r : table) curves[r.algorithm].push_back(&r);
  for (const auto& [alg, rows] : curves) {
    const auto path = dir / (alg + ".dat");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
    os << "# " << rows.front()->axis << " nmse_db success_rate row_accuracy trials failures\n";
    for (const auto* r : rows) {
      os << format_number(r->value) << ' ' << format_number(r->nmse_db) << ' ' << format_number(r->success_rate)
         << ' ' << format_number(r->row_accuracy) << ' ' << r->trials << ' ' << r->failures << '\n';
    }
    if (!os) throw std::ios_base::failure("write to " + path.string() + " failed");
  }
}

}  // namespace permsbl
