#include "permsbl/pmsbl.hpp"

#include "em_driver.hpp"
#include "linalg.hpp"
#include "permsbl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace permsbl {

HyperParams HyperParams::ones(Index L, double floor_eps) {
  return {Eigen::VectorXd::Ones(L), floor_eps};
}

void HyperParams::apply_floor() {
  gamma = gamma.cwiseMax(floor_eps);
}

std::vector<Index> HyperParams::active_rows() const {
  std::vector<Index> rows;
  if (gamma.size() == 0) return rows;
  const double threshold = std::max(1e3 * floor_eps, 1e-3 * gamma.maxCoeff());
  for (Index l = 0; l < gamma.size(); ++l)
    if (gamma(l) > threshold) rows.push_back(l);
  return rows;
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::kTolerance ? "tolerance" : "max-iters";
}

void SolverOptions::validate() const {
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  if (max_iter < 0 || warmup_max_iter < 0) throw ConfigError("iteration limits must be non-negative");
  if (!(tol >= 0.0)) throw ConfigError("tol must be non-negative");
  if (!(floor_eps > 0.0)) throw ConfigError("floor_eps must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
}

PosteriorStats posterior(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::MatrixXd& phi,
                         const PermutationMap& perm, const HyperParams& hp, double sigma2) {
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  const Index N = phi.rows();
  if (y.size() != N || perm.size() != N || hp.gamma.size() != phi.cols())
    throw ConfigError("posterior: inconsistent dimensions");

  Eigen::MatrixXd a(N, phi.cols());
  for (Index i = 0; i < N; ++i) a.row(i) = phi.row(perm.source(i));
  const Eigen::MatrixXd ag = a * hp.gamma.asDiagonal();  // P Phi Gamma
  Eigen::MatrixXd lambda = ag * a.transpose();
  lambda.diagonal().array() += sigma2;
  const detail::SpdFactor chol(lambda, "Lambda");

  PosteriorStats out;
  out.sigma = -ag.transpose() * chol.solve(ag);
  out.sigma.diagonal() += hp.gamma;
  detail::symmetrize(out.sigma);
  out.mu = ag.transpose() * chol.solve(y);
  return out;
}

HyperParams update_gamma(std::span<const PosteriorStats> stats, double floor_eps) {
  if (stats.empty()) throw ConfigError("update_gamma needs at least one column");
  HyperParams hp{Eigen::VectorXd::Zero(stats.front().mu.size()), floor_eps};
  for (const auto& s : stats) hp.gamma += s.sigma.diagonal() + s.mu.cwiseAbs2();
  hp.gamma /= static_cast<double>(stats.size());
  hp.apply_floor();
  return hp;
}

double log_evidence(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi, std::span<const PermutationMap> perms,
                    const HyperParams& hp, double sigma2) {
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  if (static_cast<Index>(perms.size()) != y.cols()) throw ConfigError("log_evidence: need one map per column");
  const Index N = phi.rows();
  // P Lambda_0 P^T with Lambda_0 = sigma2 I + Phi Gamma Phi^T, so one factor serves every column.
  Eigen::MatrixXd lambda = phi * hp.gamma.asDiagonal() * phi.transpose();
  lambda.diagonal().array() += sigma2;
  const detail::SpdFactor chol(lambda, "Lambda");
  double total = 0.0;
  for (Index m = 0; m < y.cols(); ++m) {
    Eigen::VectorXd unpermuted(N);
    for (Index i = 0; i < N; ++i) unpermuted(perms[static_cast<std::size_t>(m)].source(i)) = y(i, m);
    const double quad = unpermuted.dot(chol.solve(unpermuted).col(0));
    total += -0.5 * (static_cast<double>(N) * detail::kLog2Pi + chol.log_det() + quad);
  }
  return total;
}

namespace {

// Posterior means and variance diagonals for every column. Columns that
// observe the same set of Phi rows share one factorization of Lambda.
class IndependentEStep {
 public:
  IndependentEStep(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi, double sigma2)
      : y_(y), phi_(phi), sigma2_(sigma2) {}

  detail::EStep operator()(const Eigen::VectorXd& gamma, const detail::RowAssignment& rows) const {
    const Index L = phi_.cols(), M = y_.cols();
    detail::EStep out;
    out.mean = Eigen::MatrixXd::Zero(L, M);
    out.gamma_next = Eigen::VectorXd::Zero(L);

    // Group columns by the sorted set of source rows they observe.
    std::map<std::vector<Index>, std::vector<Index>> groups;
    std::vector<std::vector<Index>> order(static_cast<std::size_t>(M));
    for (Index m = 0; m < M; ++m) {
      const auto& r = rows[static_cast<std::size_t>(m)];
      auto& ord = order[static_cast<std::size_t>(m)];
      ord.resize(r.src.size());
      std::iota(ord.begin(), ord.end(), Index{0});
      std::sort(ord.begin(), ord.end(), [&](Index a, Index b) {
        return r.src[static_cast<std::size_t>(a)] < r.src[static_cast<std::size_t>(b)];
      });
      std::vector<Index> key;
      key.reserve(ord.size());
      for (Index k : ord) key.push_back(r.src[static_cast<std::size_t>(k)]);
      groups[std::move(key)].push_back(m);
    }

    for (const auto& [src, cols] : groups) {
      const Index n = static_cast<Index>(src.size());
      const Index cnt = static_cast<Index>(cols.size());
      if (n == 0) {
        // Nothing observed: posterior equals the prior.
        out.gamma_next += static_cast<double>(cnt) * gamma;
        continue;
      }
      Eigen::MatrixXd a(n, L);
      for (Index k = 0; k < n; ++k) a.row(k) = phi_.row(src[static_cast<std::size_t>(k)]);
      const Eigen::MatrixXd ag = a * gamma.asDiagonal();
      Eigen::MatrixXd lambda = ag * a.transpose();
      lambda.diagonal().array() += sigma2_;
      const detail::SpdFactor chol(lambda, "Lambda");

      Eigen::MatrixXd ys(n, cnt);
      for (Index c = 0; c < cnt; ++c) {
        const Index m = cols[static_cast<std::size_t>(c)];
        const auto& r = rows[static_cast<std::size_t>(m)];
        const auto& ord = order[static_cast<std::size_t>(m)];
        for (Index k = 0; k < n; ++k) ys(k, c) = y_(r.obs[static_cast<std::size_t>(ord[static_cast<std::size_t>(k)])], m);
      }
      const Eigen::MatrixXd alpha = chol.solve(ys);
      const Eigen::MatrixXd mu = ag.transpose() * alpha;
      const Eigen::VectorXd shrink = (a.array() * chol.solve(a).array()).colwise().sum().transpose();
      const Eigen::VectorXd var = gamma.array() - gamma.array().square() * shrink.array();
      const double log_det = chol.log_det();
      for (Index c = 0; c < cnt; ++c) {
        const Index m = cols[static_cast<std::size_t>(c)];
        out.mean.col(m) = mu.col(c);
        out.gamma_next += var + mu.col(c).cwiseAbs2();
        out.log_evidence +=
            -0.5 * (static_cast<double>(n) * detail::kLog2Pi + log_det + ys.col(c).dot(alpha.col(c)));
      }
    }
    out.gamma_next /= static_cast<double>(M);
    out.perm_mean = out.mean;
    return out;
  }

 private:
  const Eigen::MatrixXd& y_;
  const Eigen::MatrixXd& phi_;
  double sigma2_;
};

}  // namespace

SolverResult run_pmsbl(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi, std::span<const AnchorMap> anchors,
                       const SolverOptions& opts) {
  const MeasurementMatrix shared{phi, {}};
  return detail::run_em(y, shared, anchors, opts, IndependentEStep(y, phi, opts.sigma2));
}

}  // namespace permsbl
