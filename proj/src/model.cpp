#include "permsbl/model.hpp"

#include "permsbl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace permsbl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<Index> random_bijection(Index n, std::mt19937_64& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Index> pick(0, i);
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(pick(rng))]);
  }
  return p;
}

}  // namespace

void ProblemConfig::validate() const {
  if (K <= 0) throw ConfigError("K must be positive (0 < K)");
  if (K > N) throw ConfigError("K must not exceed N (K <= N)");
  if (N >= L) throw ConfigError("N must be smaller than L (N < L)");
  if (M < 1) throw ConfigError("M must be at least 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (!(anchor_fraction >= 0.0 && anchor_fraction <= 1.0))
    throw ConfigError("anchor_fraction must lie in [0, 1]");
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
}

Index ProblemConfig::anchor_count() const {
  const double scaled = anchor_fraction * static_cast<double>(N);
  const auto b = static_cast<Index>(std::ceil(scaled - 1e-9));
  return std::clamp<Index>(b, 0, N);
}

PermutationMap::PermutationMap(std::vector<Index> map) : map_(std::move(map)) {
  std::vector<bool> seen(map_.size(), false);
  for (Index s : map_) {
    if (s < 0 || s >= size() || seen[static_cast<std::size_t>(s)])
      throw std::invalid_argument("permutation map is not a bijection");
    seen[static_cast<std::size_t>(s)] = true;
  }
}

PermutationMap PermutationMap::identity(Index n) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  return PermutationMap(std::move(p));
}

PermutationMap PermutationMap::inverse() const {
  std::vector<Index> inv(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) inv[static_cast<std::size_t>(map_[i])] = static_cast<Index>(i);
  return PermutationMap(std::move(inv));
}

Eigen::MatrixXd PermutationMap::matrix() const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size(), size());
  for (Index i = 0; i < size(); ++i) p(i, source(i)) = 1.0;
  return p;
}

AnchorMap::AnchorMap(Index n) : entries_(static_cast<std::size_t>(n)) {}

AnchorMap::AnchorMap(std::vector<std::optional<Index>> entries) : entries_(std::move(entries)) {
  std::vector<bool> used(entries_.size(), false);
  for (const auto& e : entries_) {
    if (!e) continue;
    if (*e < 0 || *e >= size())
      throw InvalidAnchorError("anchor source " + std::to_string(*e) + " out of range");
    if (used[static_cast<std::size_t>(*e)])
      throw InvalidAnchorError("two observations anchored to source " + std::to_string(*e));
    used[static_cast<std::size_t>(*e)] = true;
  }
}

AnchorMap AnchorMap::leading(const PermutationMap& perm, Index count) {
  std::vector<std::optional<Index>> e(static_cast<std::size_t>(perm.size()));
  for (Index i = 0; i < std::min(count, perm.size()); ++i) e[static_cast<std::size_t>(i)] = perm.source(i);
  return AnchorMap(std::move(e));
}

Index AnchorMap::count() const {
  return static_cast<Index>(std::count_if(entries_.begin(), entries_.end(),
                                          [](const auto& e) { return e.has_value(); }));
}

std::vector<Index> AnchorMap::free_observations() const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (!anchored(i)) out.push_back(i);
  return out;
}

std::vector<Index> AnchorMap::free_sources() const {
  std::vector<bool> used(entries_.size(), false);
  for (const auto& e : entries_)
    if (e) used[static_cast<std::size_t>(*e)] = true;
  std::vector<Index> out;
  for (Index s = 0; s < size(); ++s)
    if (!used[static_cast<std::size_t>(s)]) out.push_back(s);
  return out;
}

PermutationMap AnchorMap::ascending_completion() const {
  std::vector<Index> p(entries_.size());
  const auto obs = free_observations();
  const auto src = free_sources();
  for (Index i = 0; i < size(); ++i)
    if (anchored(i)) p[static_cast<std::size_t>(i)] = source(i);
  for (std::size_t k = 0; k < obs.size(); ++k) p[static_cast<std::size_t>(obs[k])] = src[k];
  return PermutationMap(std::move(p));
}

bool AnchorMap::consistent_with(const PermutationMap& perm) const {
  if (perm.size() != size()) return false;
  for (Index i = 0; i < size(); ++i)
    if (anchored(i) && perm.source(i) != source(i)) return false;
  return true;
}

AnchorMap ProblemInstance::anchor_map(Index m) const {
  return AnchorMap::leading(perms_true[static_cast<std::size_t>(m)], static_cast<Index>(anchors.size()));
}

std::vector<AnchorMap> ProblemInstance::anchor_maps() const {
  std::vector<AnchorMap> out;
  out.reserve(perms_true.size());
  for (Index m = 0; m < static_cast<Index>(perms_true.size()); ++m) out.push_back(anchor_map(m));
  return out;
}

Eigen::VectorXd apply_perm(const PermutationMap& perm, const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::VectorXd out(perm.size());
  for (Index i = 0; i < perm.size(); ++i) out(i) = v(perm.source(i));
  return out;
}

double sigma_from_snr(double snr_db, const Eigen::MatrixXd& phi, const Eigen::MatrixXd& x) {
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
  const double energy = (phi * x).squaredNorm();
  if (energy == 0.0) throw NumericalError("degenerate signal: Phi * X is identically zero");
  const double count = static_cast<double>(phi.rows() * x.cols());
  return energy / (count * std::pow(10.0, snr_db / 10.0));
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(master ^ splitmix64(trial));
}

ProblemInstance gen_problem(const ProblemConfig& config) {
  config.validate();
  const Index L = config.L, N = config.N, M = config.M, K = config.K;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  ProblemInstance inst;
  inst.config = config;

  inst.phi.entries.resize(N, L);
  for (Index j = 0; j < L; ++j)
    for (Index i = 0; i < N; ++i) inst.phi.entries(i, j) = normal(rng);

  auto rows = random_bijection(L, rng);
  rows.resize(static_cast<std::size_t>(K));
  std::sort(rows.begin(), rows.end());
  inst.x_true.support = rows;

  Eigen::MatrixXd& x = inst.x_true.entries;
  x = Eigen::MatrixXd::Zero(L, M);
  const double drive = std::sqrt(1.0 - config.rho * config.rho);
  for (Index m = 0; m < M; ++m) {
    for (Index l : rows) {
      if (m == 0 || config.rho == 0.0)
        x(l, m) = normal(rng);
      else
        x(l, m) = config.rho * x(l, m - 1) + drive * normal(rng);
    }
  }

  inst.perms_true.reserve(static_cast<std::size_t>(M));
  if (config.shared_perm) {
    PermutationMap p(random_bijection(N, rng));
    inst.perms_true.assign(static_cast<std::size_t>(M), p);
  } else {
    for (Index m = 0; m < M; ++m) inst.perms_true.emplace_back(random_bijection(N, rng));
  }

  const Index b = config.anchor_count();
  inst.anchors.resize(static_cast<std::size_t>(b));
  std::iota(inst.anchors.begin(), inst.anchors.end(), Index{0});

  inst.sigma2 = sigma_from_snr(config.snr_db, inst.phi.entries, x);
  const double sigma = std::sqrt(inst.sigma2);
  const Eigen::MatrixXd clean = inst.phi.entries * x;
  inst.noise.resize(N, M);
  inst.y.resize(N, M);
  for (Index m = 0; m < M; ++m) {
    for (Index i = 0; i < N; ++i) inst.noise(i, m) = sigma * normal(rng);
    inst.y.col(m) = apply_perm(inst.perms_true[static_cast<std::size_t>(m)], clean.col(m)) + inst.noise.col(m);
  }
  return inst;
}

}  // namespace permsbl
