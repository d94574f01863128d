#include "oracles.hpp"

#include "permsbl/errors.hpp"
#include "permsbl/pksbl.hpp"
#include "permsbl/pmsbl.hpp"

#include <gtest/gtest.h>

using namespace permsbl;

namespace {

SolverOptions options_for(const ProblemInstance& inst, bool shared) {
  SolverOptions o;
  o.shared_perm = shared;
  o.sigma2 = inst.sigma2;
  o.rho = inst.config.rho;
  return o;
}

MeasurementMatrix per_column_copy(const ProblemInstance& inst) {
  MeasurementMatrix phi = inst.phi;
  phi.per_column.assign(static_cast<std::size_t>(inst.config.M), inst.phi.entries);
  return phi;
}

}  // namespace

TEST(UpdateGammaAr, ReducesToIndependentUpdate) {
  std::mt19937_64 rng(1);
  const Index N = 3, L = 5;
  const Eigen::MatrixXd phi = oracle::randn(N, L, rng);
  const Eigen::VectorXd y = oracle::randn(N, 1, rng);
  const HyperParams hp = HyperParams::ones(L);
  const std::vector<KalmanStep> steps{{phi, y}};
  const auto st = kalman_smoother(steps, hp.gamma, 0.0, 0.3);
  const auto ps = posterior(y, phi, PermutationMap::identity(N), hp, 0.3);
  EXPECT_LT((update_gamma_ar(st, 0.0).gamma - update_gamma(std::span(&ps, 1)).gamma).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(UpdateGammaAr, ZeroMomentsGiveFloor) {
  SmoothedMoments zero{std::vector<Eigen::VectorXd>(3, Eigen::VectorXd::Zero(4))};
  EXPECT_EQ(update_gamma_ar(zero, 0.5, 1e-12).gamma, Eigen::VectorXd::Constant(4, 1e-12));
  EXPECT_THROW(update_gamma_ar(zero, 1.0), ConfigError);
}

TEST(UpdateGammaAr, MaximizesExpectedLogPrior) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (double rho : {0.3, 0.9}) {
    const Index d = 4, n = 3, M = 4;
    std::vector<KalmanStep> steps;
    std::vector<Eigen::MatrixXd> obs;
    std::vector<Eigen::VectorXd> ys;
    for (Index m = 0; m < M; ++m) {
      steps.push_back({oracle::randn(n, d, rng), oracle::randn(n, 1, rng)});
      obs.push_back(steps.back().obs_matrix);
      ys.push_back(steps.back().y);
    }
    Eigen::VectorXd q(d);
    for (Index l = 0; l < d; ++l) q(l) = u(rng);
    const auto st = kalman_smoother(steps, q, rho, 0.2);
    const Eigen::VectorXd g = update_gamma_ar(st, rho).gamma;
    const auto post = oracle::StackedChain(obs, ys, q, rho).posterior(0.2);
    const double best = oracle::expected_log_prior(post, g, rho, M);
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd h = g;
      for (Index l = 0; l < d; ++l) h(l) *= u(rng);
      EXPECT_GE(best, oracle::expected_log_prior(post, h, rho, M));
    }
    // Coordinate-wise stationarity.
    for (Index l = 0; l < d; ++l) {
      Eigen::VectorXd up = g, down = g;
      up(l) *= 1.0 + 1e-4;
      down(l) *= 1.0 - 1e-4;
      EXPECT_GE(best, oracle::expected_log_prior(post, up, rho, M));
      EXPECT_GE(best, oracle::expected_log_prior(post, down, rho, M));
    }
  }
}

TEST(RunPksbl, RejectsRhoOne) {
  ProblemConfig c;
  c.rho = 1.0;
  const auto inst = gen_problem(c);
  EXPECT_THROW(run_pksbl(inst.y, inst.phi, inst.anchor_maps(), options_for(inst, true)), ConfigError);
}

TEST(RunPksbl, RhoZeroMatchesPmsbl) {
  for (bool shared : {true, false}) {
    for (std::uint64_t t = 0; t < 3; ++t) {
      ProblemConfig c;
      c.shared_perm = shared;
      c.anchor_fraction = 0.4;
      c.seed = trial_seed(41, t);
      const auto inst = gen_problem(c);
      const auto a = run_pksbl(inst.y, inst.phi, inst.anchor_maps(), options_for(inst, shared));
      const auto b = run_pmsbl(inst.y, inst.phi.entries, inst.anchor_maps(), options_for(inst, shared));
      EXPECT_EQ(a.state.perms, b.state.perms);
      EXPECT_LT((a.x_hat - b.x_hat).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(RunPksbl, ReducedAndDensePathsAgree) {
  for (std::uint64_t t = 0; t < 3; ++t) {
    ProblemConfig c;
    c.L = 40;
    c.N = 12;
    c.M = 8;
    c.K = 3;
    c.rho = 0.9;
    c.anchor_fraction = 0.5;
    c.seed = trial_seed(43, t);
    const auto inst = gen_problem(c);
    auto opts = options_for(inst, true);
    opts.max_iter = 30;
    const auto reduced = run_pksbl(inst.y, inst.phi, inst.anchor_maps(), opts);
    const auto dense = run_pksbl(inst.y, per_column_copy(inst), inst.anchor_maps(), opts);
    EXPECT_EQ(reduced.state.perms, dense.state.perms);
    EXPECT_EQ(reduced.state.iter, dense.state.iter);
    EXPECT_LT(oracle::rel_diff(reduced.x_hat, dense.x_hat), 1e-6);
    ASSERT_EQ(reduced.state.log_evidence_trace.size(), dense.state.log_evidence_trace.size());
    for (std::size_t i = 0; i < reduced.state.log_evidence_trace.size(); ++i)
      EXPECT_NEAR(reduced.state.log_evidence_trace[i], dense.state.log_evidence_trace[i],
                  1e-7 * std::abs(dense.state.log_evidence_trace[i]));
  }
}

TEST(RunPksbl, HalfAnchoredCorrelatedRecovers) {
  ProblemConfig c;
  c.rho = 0.95;
  c.seed = 9;
  const auto inst = gen_problem(c);
  const auto res = run_pksbl(inst.y, inst.phi, inst.anchor_maps(), options_for(inst, true));
  EXPECT_EQ(res.state.perms, inst.perms_true);
  EXPECT_LT((res.x_hat - inst.x_true.entries).squaredNorm() / inst.x_true.entries.squaredNorm(), 1e-3);
}

TEST(RunPksbl, SmoothedPermutationStepIsMonotone) {
  for (std::uint64_t t = 0; t < 5; ++t) {
    ProblemConfig c;
    c.rho = 0.95;
    c.anchor_fraction = 0.3;
    c.snr_db = 30.0;
    c.seed = trial_seed(47, t);
    const auto inst = gen_problem(c);
    auto opts = options_for(inst, true);
    opts.perm_from_smoothed = true;
    const auto res = run_pksbl(inst.y, inst.phi, inst.anchor_maps(), opts);
    const auto& tr = res.state.log_evidence_trace;
    for (std::size_t i = 1; i < tr.size(); ++i)
      EXPECT_GE(tr[i] - tr[i - 1], -1e-9) << "step " << i;
  }
}

TEST(ObservationSteps, RowsFollowPermutation) {
  std::mt19937_64 rng(3);
  MeasurementMatrix phi;
  phi.entries = oracle::randn(4, 6, rng);
  const Eigen::MatrixXd y = oracle::randn(4, 2, rng);
  const std::vector<PermutationMap> perms{PermutationMap({3, 2, 1, 0}), PermutationMap::identity(4)};
  const auto steps = observation_steps(y, phi, perms);
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].obs_matrix, perms[0].matrix() * phi.entries);
  EXPECT_EQ(steps[1].obs_matrix, phi.entries);
  EXPECT_EQ(steps[0].y, y.col(0));
}
