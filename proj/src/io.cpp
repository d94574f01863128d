#include "permsbl/io.hpp"

#include "permsbl/errors.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace permsbl {

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; }))
      throw ConfigError(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
void read_field(const Json& j, const char* key, T& out, const char* what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string(what) + ": field '" + key + "' has the wrong type");
  }
}

const Json& require(const Json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw ConfigError(std::string(what) + ": missing field '" + key + "'");
  return j.at(key);
}

Index read_index(const Json& j, const char* what) {
  if (!j.is_number_integer()) throw ConfigError(std::string(what) + ": expected an integer index");
  return j.get<Index>();
}

std::string_view to_string(InitMode mode) {
  return mode == InitMode::kAnchorWarmStart ? "anchor-warm-start" : "ascending-completion";
}

InitMode parse_init(const std::string& s) {
  if (s == "anchor-warm-start") return InitMode::kAnchorWarmStart;
  if (s == "ascending-completion") return InitMode::kAscendingCompletion;
  throw ConfigError("unknown init mode '" + s + "'");
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& a) {
  Json rows = Json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    Json row = Json::array();
    for (Index c = 0; c < a.cols(); ++c) row.push_back(a(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be a nested array");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows == 0 ? 0 : static_cast<Index>(j.front().size());
  Eigen::MatrixXd a(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ConfigError(std::string(what) + " is ragged");
    for (Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ConfigError(std::string(what) + " has a non-numeric entry");
      a(i, c) = v.get<double>();
    }
  }
  return a;
}

Json config_to_json(const ProblemConfig& c) {
  return {{"L", c.L},
          {"N", c.N},
          {"M", c.M},
          {"K", c.K},
          {"rho", c.rho},
          {"snr_db", c.snr_db},
          {"anchor_fraction", c.anchor_fraction},
          {"shared_perm", c.shared_perm},
          {"seed", c.seed}};
}

ProblemConfig config_from_json(const Json& j) {
  constexpr const char* what = "config";
  check_keys(j, {"L", "N", "M", "K", "rho", "snr_db", "anchor_fraction", "shared_perm", "seed"}, what);
  ProblemConfig c;
  read_field(j, "L", c.L, what);
  read_field(j, "N", c.N, what);
  read_field(j, "M", c.M, what);
  read_field(j, "K", c.K, what);
  read_field(j, "rho", c.rho, what);
  read_field(j, "snr_db", c.snr_db, what);
  read_field(j, "anchor_fraction", c.anchor_fraction, what);
  read_field(j, "shared_perm", c.shared_perm, what);
  read_field(j, "seed", c.seed, what);
  c.validate();
  return c;
}

Json instance_to_json(const ProblemInstance& inst) {
  Json perms = Json::array();
  for (const auto& p : inst.perms_true) perms.push_back(p.map());
  return {{"phi", matrix_to_json(inst.phi.entries)},
          {"x_true", matrix_to_json(inst.x_true.entries)},
          {"perms", perms},
          {"anchors", inst.anchors},
          {"y", matrix_to_json(inst.y)},
          {"sigma2", inst.sigma2},
          {"config", config_to_json(inst.config)}};
}

ProblemInstance instance_from_json(const Json& j) {
  constexpr const char* what = "instance";
  check_keys(j, {"phi", "x_true", "perms", "anchors", "y", "sigma2", "config"}, what);
  ProblemInstance inst;
  inst.config = config_from_json(require(j, "config", what));
  const auto& c = inst.config;

  inst.phi.entries = matrix_from_json(require(j, "phi", what), "phi");
  inst.x_true.entries = matrix_from_json(require(j, "x_true", what), "x_true");
  inst.y = matrix_from_json(require(j, "y", what), "y");
  if (inst.phi.entries.rows() != c.N || inst.phi.entries.cols() != c.L) throw ConfigError("phi must be N x L");
  if (inst.x_true.entries.rows() != c.L || inst.x_true.entries.cols() != c.M)
    throw ConfigError("x_true must be L x M");
  if (inst.y.rows() != c.N || inst.y.cols() != c.M) throw ConfigError("y must be N x M");

  const auto& perms = require(j, "perms", what);
  if (!perms.is_array() || static_cast<Index>(perms.size()) != c.M) throw ConfigError("perms must hold M maps");
  for (const auto& p : perms) {
    if (!p.is_array() || static_cast<Index>(p.size()) != c.N) throw ConfigError("each perm must have N entries");
    std::vector<Index> map;
    for (const auto& v : p) map.push_back(read_index(v, "perms"));
    try {
      inst.perms_true.emplace_back(std::move(map));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("perms: ") + e.what());
    }
  }

  const auto& anchors = require(j, "anchors", what);
  if (!anchors.is_array()) throw ConfigError("anchors must be an array");
  std::set<Index> seen;
  for (const auto& v : anchors) {
    const Index i = read_index(v, "anchors");
    if (i < 0 || i >= c.N || !seen.insert(i).second) throw ConfigError("anchors must be distinct indices in [0, N)");
    inst.anchors.push_back(i);
  }

  read_field(j, "sigma2", inst.sigma2, what);
  if (!(inst.sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");

  for (Index l = 0; l < c.L; ++l)
    if (inst.x_true.entries.row(l).any()) inst.x_true.support.push_back(l);

  inst.noise.resize(c.N, c.M);
  for (Index m = 0; m < c.M; ++m) {
    const Eigen::VectorXd clean = inst.phi.entries * inst.x_true.entries.col(m);
    inst.noise.col(m) = inst.y.col(m) - apply_perm(inst.perms_true[static_cast<std::size_t>(m)], clean);
  }
  return inst;
}

Json trial_options_to_json(const TrialOptions& o) {
  return {{"max_iter", o.max_iter},
          {"tol", o.tol},
          {"floor_eps", o.floor_eps},
          {"anchors_enforced", o.anchors_enforced},
          {"init", to_string(o.init)},
          {"warmup_max_iter", o.warmup_max_iter},
          {"perm_from_smoothed", o.perm_from_smoothed}};
}

TrialOptions trial_options_from_json(const Json& j) {
  constexpr const char* what = "options";
  check_keys(j,
             {"max_iter", "tol", "floor_eps", "anchors_enforced", "init", "warmup_max_iter", "perm_from_smoothed"},
             what);
  TrialOptions o;
  read_field(j, "max_iter", o.max_iter, what);
  read_field(j, "tol", o.tol, what);
  read_field(j, "floor_eps", o.floor_eps, what);
  read_field(j, "anchors_enforced", o.anchors_enforced, what);
  std::string init(to_string(o.init));
  read_field(j, "init", init, what);
  o.init = parse_init(init);
  read_field(j, "warmup_max_iter", o.warmup_max_iter, what);
  read_field(j, "perm_from_smoothed", o.perm_from_smoothed, what);
  if (o.max_iter < 0 || o.warmup_max_iter < 0) throw ConfigError("iteration limits must be non-negative");
  if (!(o.tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(o.floor_eps > 0.0)) throw ConfigError("floor_eps must be positive");
  return o;
}

Json sweep_spec_to_json(const SweepSpec& s) {
  Json algs = Json::array();
  for (auto a : s.algorithms) algs.push_back(std::string(to_string(a)));
  return {{"base", config_to_json(s.base)},
          {"axis", std::string(to_string(s.axis))},
          {"values", s.values},
          {"algorithms", algs},
          {"trials", s.trials},
          {"master_seed", s.master_seed},
          {"options", trial_options_to_json(s.options)}};
}

SweepSpec sweep_spec_from_json(const Json& j) {
  constexpr const char* what = "sweep spec";
  check_keys(j, {"base", "axis", "values", "algorithms", "trials", "master_seed", "options"}, what);
  SweepSpec s;
  if (j.contains("base")) s.base = config_from_json(j.at("base"));
  std::string axis(to_string(s.axis));
  read_field(j, "axis", axis, what);
  s.axis = parse_axis(axis);
  read_field(j, "values", s.values, what);
  std::vector<std::string> algs;
  read_field(j, "algorithms", algs, what);
  for (const auto& a : algs) s.algorithms.push_back(parse_algorithm(a));
  read_field(j, "trials", s.trials, what);
  read_field(j, "master_seed", s.master_seed, what);
  if (j.contains("options")) s.options = trial_options_from_json(j.at("options"));
  s.validate();
  return s;
}

Json solve_output_to_json(std::string_view algorithm, const Eigen::MatrixXd& x_hat,
                          const std::vector<PermutationMap>& perms, const EMState* state,
                          const TrialResult& score) {
  Json p = Json::array();
  for (const auto& m : perms) p.push_back(m.map());
  Json out = {{"algorithm", std::string(algorithm)},
              {"x_hat", matrix_to_json(x_hat)},
              {"perms", p},
              {"score",
               {{"nmse", score.nmse},
                {"nmse_db", score.nmse_db},
                {"perm_exact", score.perm_exact},
                {"row_accuracy", score.row_accuracy}}}};
  if (state) {
    out["iters"] = state->iter;
    out["warmup_iters"] = state->warmup_iters;
    out["converged"] = state->converged;
    out["stop_reason"] = std::string(to_string(state->reason));
    out["gamma"] = std::vector<double>(state->gamma.gamma.data(), state->gamma.gamma.data() + state->gamma.gamma.size());
    out["log_evidence_trace"] = state->log_evidence_trace;
  }
  return out;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw std::ios_base::failure("write to " + path.string() + " failed");
}

}  // namespace permsbl
