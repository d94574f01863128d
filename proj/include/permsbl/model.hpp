#pragma once

// Data model of the multiple-measurement unlabeled sensing problem
//
//   y_m = P_m Phi x_m + n_m,   x_{m+1} = rho x_m + u_{m+1},
//
// and a seeded generator of synthetic instances.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace permsbl {

using Index = Eigen::Index;

struct ProblemConfig {
  Index L = 100;  // signal dimension
  Index N = 30;   // observations per column
  Index M = 20;   // columns
  Index K = 4;    // active rows
  double rho = 0.0;
  double snr_db = 60.0;
  double anchor_fraction = 0.5;
  bool shared_perm = true;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  /// ceil(anchor_fraction * N), robust to representation error in the product.
  Index anchor_count() const;

  bool operator==(const ProblemConfig&) const = default;
};

/// A bijection on observation indices. `source(i)` is the row of Phi that
/// produced observation i, so row i of P*Phi is row source(i) of Phi.
class PermutationMap {
 public:
  PermutationMap() = default;
  /// Throws std::invalid_argument when `map` is not a bijection on [0, n).
  explicit PermutationMap(std::vector<Index> map);

  static PermutationMap identity(Index n);

  Index size() const { return static_cast<Index>(map_.size()); }
  Index source(Index i) const { return map_[static_cast<std::size_t>(i)]; }
  const std::vector<Index>& map() const { return map_; }
  PermutationMap inverse() const;

  /// Dense N x N matrix with P(i, source(i)) = 1.
  Eigen::MatrixXd matrix() const;

  bool operator==(const PermutationMap&) const = default;

 private:
  std::vector<Index> map_;
};

/// Partial assignment observation -> source row known a priori.
class AnchorMap {
 public:
  AnchorMap() = default;
  /// Empty anchor set over n observations.
  explicit AnchorMap(Index n);
  /// Throws InvalidAnchorError on out-of-range indices or when two
  /// observations are assigned the same source.
  explicit AnchorMap(std::vector<std::optional<Index>> entries);

  /// The first `count` observations of `perm`, i.e. the anchor convention
  /// used by the generator.
  static AnchorMap leading(const PermutationMap& perm, Index count);

  Index size() const { return static_cast<Index>(entries_.size()); }
  Index count() const;
  bool anchored(Index i) const { return entries_[static_cast<std::size_t>(i)].has_value(); }
  Index source(Index i) const { return *entries_[static_cast<std::size_t>(i)]; }
  const std::vector<std::optional<Index>>& entries() const { return entries_; }

  /// Free observation indices and free source indices, both ascending.
  std::vector<Index> free_observations() const;
  std::vector<Index> free_sources() const;

  /// Anchors plus free observations paired with free sources in ascending order.
  PermutationMap ascending_completion() const;

  bool consistent_with(const PermutationMap& perm) const;

  bool operator==(const AnchorMap&) const = default;

 private:
  std::vector<std::optional<Index>> entries_;
};

/// Either one shared N x L matrix or one matrix per column.
struct MeasurementMatrix {
  Eigen::MatrixXd entries;
  std::vector<Eigen::MatrixXd> per_column;

  bool time_varying() const { return !per_column.empty(); }
  const Eigen::MatrixXd& at(Index m) const {
    return per_column.empty() ? entries : per_column[static_cast<std::size_t>(m)];
  }
  Index rows() const { return entries.rows(); }
  Index cols() const { return entries.cols(); }
};

struct SignalMatrix {
  Eigen::MatrixXd entries;  // L x M
  std::vector<Index> support;  // ascending, size K
};

struct ProblemInstance {
  ProblemConfig config;
  MeasurementMatrix phi;
  SignalMatrix x_true;
  std::vector<PermutationMap> perms_true;  // M maps
  std::vector<Index> anchors;              // anchored observation indices
  Eigen::MatrixXd y;                       // N x M
  Eigen::MatrixXd noise;                   // N x M realization added to y
  double sigma2 = 0.0;

  /// Anchor map of column m.
  AnchorMap anchor_map(Index m) const;
  std::vector<AnchorMap> anchor_maps() const;
};

/// out(i) = v(source(i)).
Eigen::VectorXd apply_perm(const PermutationMap& perm, const Eigen::Ref<const Eigen::VectorXd>& v);

/// Noise variance giving the requested per-entry SNR for Phi * X.
/// Throws NumericalError when Phi * X is identically zero.
double sigma_from_snr(double snr_db, const Eigen::MatrixXd& phi, const Eigen::MatrixXd& x);

/// Stream seed of trial `trial` of an experiment seeded with `master`.
/// Order-independent: each trial's stream depends only on (master, trial).
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial);

ProblemInstance gen_problem(const ProblemConfig& config);

}  // namespace permsbl
