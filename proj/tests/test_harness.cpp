#include "oracles.hpp"

#include "permsbl/errors.hpp"
#include "permsbl/harness.hpp"
#include "permsbl/io.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace permsbl;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("permsbl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

SweepSpec small_sweep() {
  SweepSpec s;
  s.base.L = 40;
  s.base.N = 12;
  s.base.M = 6;
  s.base.K = 3;
  s.base.snr_db = 40.0;
  s.axis = SweepAxis::kAnchorFraction;
  s.values = {0.3, 0.6};
  s.algorithms = {Algorithm::kPmsblShared, Algorithm::kPmsblIndep, Algorithm::kSomp};
  s.trials = 6;
  s.master_seed = 17;
  return s;
}

}  // namespace

TEST(Names, RoundTrip) {
  for (auto a : {Algorithm::kPmsblShared, Algorithm::kPmsblIndep, Algorithm::kPksbl, Algorithm::kSomp})
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  for (auto a : {SweepAxis::kSnrDb, SweepAxis::kAnchorFraction, SweepAxis::kM}) EXPECT_EQ(parse_axis(to_string(a)), a);
  EXPECT_THROW(parse_algorithm("msbl"), ConfigError);
  EXPECT_THROW(parse_axis("K"), ConfigError);
}

TEST(RunTrial, Deterministic) {
  ProblemConfig c;
  c.anchor_fraction = 0.3;
  for (auto alg : {Algorithm::kPmsblShared, Algorithm::kSomp}) {
    const auto a = run_trial(c, alg, 123);
    const auto b = run_trial(c, alg, 123);
    EXPECT_TRUE(a.same_outcome(b));
  }
}

TEST(RunTrial, FullyAnchoredHighSnrFixture) {
  ProblemConfig c;
  c.anchor_fraction = 1.0;
  const auto r = run_trial(c, Algorithm::kPmsblShared, trial_seed(1, 0));
  EXPECT_FALSE(r.failed);
  EXPECT_TRUE(r.perm_exact);
  EXPECT_EQ(r.row_accuracy, 1.0);
  EXPECT_LT(r.nmse_db, -30.0);
}

TEST(RunTrial, NoiseDominatedRowAccuracyNearChance) {
  ProblemConfig c;
  c.snr_db = -40.0;
  c.anchor_fraction = 0.0;
  // Chance level: expected fraction of fixed points of a uniform permutation.
  std::mt19937_64 rng(5);
  double chance = 0.0;
  for (int t = 0; t < 2000; ++t) {
    const auto p = oracle::random_perm(c.N, rng);
    for (Index i = 0; i < c.N; ++i) chance += p[static_cast<std::size_t>(i)] == i ? 1.0 : 0.0;
  }
  chance /= 2000.0 * static_cast<double>(c.N);
  double acc = 0.0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const auto r = run_trial(c, Algorithm::kPmsblIndep, trial_seed(3, t));
    EXPECT_LT(r.row_accuracy, 0.5);
    acc += r.row_accuracy / 10.0;
  }
  EXPECT_LT(acc, chance + 0.1);
}

TEST(ScoreEstimate, Definitions) {
  ProblemConfig c;
  c.L = 10;
  c.N = 4;
  c.M = 2;
  c.K = 2;
  c.anchor_fraction = 0.5;
  c.shared_perm = false;
  const auto inst = gen_problem(c);
  auto perms = inst.perms_true;
  auto r = score_estimate(inst, inst.x_true.entries, perms);
  EXPECT_EQ(r.nmse, 0.0);
  EXPECT_TRUE(r.perm_exact);
  EXPECT_EQ(r.row_accuracy, 1.0);

  // Swap the two free rows of column 1: 2 of 4 free rows are wrong.
  auto map = perms[1].map();
  std::swap(map[2], map[3]);
  perms[1] = PermutationMap(map);
  r = score_estimate(inst, 2.0 * inst.x_true.entries, perms);
  EXPECT_DOUBLE_EQ(r.nmse, 1.0);
  EXPECT_DOUBLE_EQ(r.nmse_db, 0.0);
  EXPECT_FALSE(r.perm_exact);
  EXPECT_DOUBLE_EQ(r.row_accuracy, 0.5);
}

TEST(Aggregate, ExcludesFailuresAndCountsThem) {
  TrialResult ok;
  ok.nmse_db = -20.0;
  ok.perm_exact = true;
  ok.row_accuracy = 1.0;
  TrialResult bad;
  bad.nmse_db = -10.0;
  bad.row_accuracy = 0.5;
  TrialResult failed;
  failed.failed = true;
  const auto row = aggregate("M", Algorithm::kPksbl, 10.0, {ok, bad, failed});
  EXPECT_EQ(row.trials, 3);
  EXPECT_EQ(row.failures, 1);
  EXPECT_DOUBLE_EQ(row.nmse_db, -15.0);
  EXPECT_DOUBLE_EQ(row.success_rate, 0.5);
  EXPECT_DOUBLE_EQ(row.row_accuracy, 0.75);
  EXPECT_EQ(row.algorithm, "pksbl");
}

TEST(RunSweep, SingleTrialEqualsTrialResult) {
  auto s = small_sweep();
  s.trials = 1;
  s.values = {0.5};
  s.algorithms = {Algorithm::kPmsblShared};
  const auto out = run_sweep(s);
  ASSERT_EQ(out.table.size(), 1u);
  const auto r = run_trial(s.config_at(0.5), Algorithm::kPmsblShared, trial_seed(s.master_seed, 0));
  EXPECT_EQ(out.table[0].nmse_db, r.nmse_db);
  EXPECT_EQ(out.table[0].success_rate, r.perm_exact ? 1.0 : 0.0);
  EXPECT_EQ(out.table[0].row_accuracy, r.row_accuracy);
  EXPECT_EQ(out.table[0].trials, 1);
}

TEST(RunSweep, ByteIdenticalAcrossWorkerCounts) {
  const auto s = small_sweep();
  const std::string one = format_csv(run_sweep(s, 1).table);
  const std::string four = format_csv(run_sweep(s, 4).table);
  const std::string three = format_csv(run_sweep(s, 3).table);
  EXPECT_EQ(one, four);
  EXPECT_EQ(one, three);
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 1 + 2 * 3);
}

TEST(RunSweep, ValidatesSpec) {
  auto s = small_sweep();
  s.values = {0.6, 0.3};
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_sweep();
  s.trials = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_sweep();
  s.values = {0.5, INFINITY};
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_sweep();
  s.axis = SweepAxis::kM;
  s.values = {2.5};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Csv, HeaderOnlyForEmptyTable) { EXPECT_EQ(format_csv({}), std::string(kCsvHeader) + "\n"); }

TEST(Csv, OneRowLayout) {
  SweepRow r{"snr_db", "somp", 10.0, -12.5, 0.25, 0.75, 200, 1};
  EXPECT_EQ(format_csv({r}), std::string(kCsvHeader) + "\nsnr_db,somp,10,-12.5,0.25,0.75,200,1\n");
}

TEST(Csv, RoundTripIsExact) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-50.0, 0.0);
  SweepTable t;
  for (int i = 0; i < 10; ++i)
    t.push_back({"anchor_fraction", "pmsbl-shared", 0.1 * i, u(rng), u(rng) / -50.0, 1.0 / 3.0, 200, i});
  EXPECT_EQ(parse_csv(format_csv(t)), t);
  const auto dir = scratch_dir("csv");
  write_csv(t, dir / "t.csv");
  EXPECT_EQ(read_csv(dir / "t.csv"), t);
  EXPECT_THROW(parse_csv("bogus\n"), std::invalid_argument);
  EXPECT_THROW(parse_csv(std::string(kCsvHeader) + "\na,b,1\n"), std::invalid_argument);
  EXPECT_THROW(write_csv(t, dir / "missing" / "t.csv"), std::ios_base::failure);
}

TEST(PlotData, OneFilePerCurve) {
  const SweepTable t{{"M", "pmsbl-shared", 10, -30, 0.9, 0.99, 200, 0},
                     {"M", "pmsbl-indep", 10, -25, 0.5, 0.9, 200, 0},
                     {"M", "pmsbl-shared", 20, -35, 0.95, 0.995, 200, 0}};
  const auto dir = scratch_dir("plot");
  emit_plot_data(t, dir);
  EXPECT_EQ(slurp(dir / "pmsbl-shared.dat"),
            "# M nmse_db success_rate row_accuracy trials failures\n"
            "10 -30 0.90000000000000002 0.98999999999999999 200 0\n"
            "20 -35 0.94999999999999996 0.995 200 0\n");
  EXPECT_TRUE(std::filesystem::exists(dir / "pmsbl-indep.dat"));
  const auto first = slurp(dir / "pmsbl-indep.dat");
  emit_plot_data(t, dir);
  EXPECT_EQ(slurp(dir / "pmsbl-indep.dat"), first);
}

TEST(Io, InstanceRoundTrip) {
  for (bool shared : {true, false}) {
    ProblemConfig c;
    c.L = 15;
    c.N = 6;
    c.M = 3;
    c.K = 2;
    c.rho = 0.5;
    c.shared_perm = shared;
    c.seed = 31;
    const auto inst = gen_problem(c);
    const Json j = Json::parse(instance_to_json(inst).dump());
    std::vector<std::string> keys;
    for (const auto& item : j.items()) keys.push_back(item.key());
    std::sort(keys.begin(), keys.end());
    EXPECT_EQ(keys, (std::vector<std::string>{"anchors", "config", "perms", "phi", "sigma2", "x_true", "y"}));
    const auto back = instance_from_json(j);
    EXPECT_EQ(back.config, inst.config);
    EXPECT_EQ(back.phi.entries, inst.phi.entries);
    EXPECT_EQ(back.x_true.entries, inst.x_true.entries);
    EXPECT_EQ(back.x_true.support, inst.x_true.support);
    EXPECT_EQ(back.perms_true, inst.perms_true);
    EXPECT_EQ(back.anchors, inst.anchors);
    EXPECT_EQ(back.y, inst.y);
    EXPECT_EQ(back.sigma2, inst.sigma2);
    EXPECT_LT((back.noise - inst.noise).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(j["phi"].size(), 6u);  // row-major: N rows of L entries
    EXPECT_EQ(j["phi"][0].size(), 15u);
  }
}

TEST(Io, ConfigErrors) {
  EXPECT_THROW(config_from_json(Json::parse(R"({"L": 10, "N": 20})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"Lx": 10})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"rho": "high"})")), ConfigError);
  EXPECT_EQ(config_from_json(Json::object()), ProblemConfig{});
}

TEST(Io, SweepSpecRoundTrip) {
  auto s = small_sweep();
  s.options.init = InitMode::kAscendingCompletion;
  s.options.perm_from_smoothed = true;
  const auto back = sweep_spec_from_json(sweep_spec_to_json(s));
  EXPECT_EQ(sweep_spec_to_json(back), sweep_spec_to_json(s));
  EXPECT_THROW(sweep_spec_from_json(Json::parse(R"({"axis": "snr_db", "values": [1], "algorithms": ["x"]})")),
               ConfigError);
}
