#pragma once

// Exact solution of max_P y^T P v over permutation matrices.
//
// The objective sum_i y(i) v(source(i)) is a sum of pairwise products, so by
// the rearrangement inequality it is maximized by pairing the k-th largest
// entry of y with the k-th largest entry of v. Anchored observations keep
// their known source and the pairing runs over what is left.

#include "permsbl/model.hpp"

#include <Eigen/Dense>

#include <span>

namespace permsbl {

struct PermObjective {
  Eigen::VectorXd y;  // observation column
  Eigen::VectorXd v;  // predicted unpermuted column, Phi * mu

  /// Throws std::invalid_argument on a length mismatch.
  void validate() const;
};

/// sum_i y(i) * v(p.source(i)).
double perm_objective(const PermObjective& obj, const PermutationMap& p);

/// Rank pairing of y and v, both sorted descending; ties keep ascending
/// original index.
PermutationMap rearrangement_argmax(const PermObjective& obj);

/// Rank pairing restricted to free observations and free sources. With an
/// empty anchor map this is rearrangement_argmax.
PermutationMap constrained_rearrangement_argmax(const PermObjective& obj, const AnchorMap& anchors);

/// Exhaustive search over anchor-consistent permutations. Ties resolve to the
/// lexicographically smallest map. Throws SizeGuardError with more than
/// kBruteForceMaxFree free indices.
inline constexpr Index kBruteForceMaxFree = 9;
PermutationMap brute_force_argmax(const PermObjective& obj, const AnchorMap& anchors);

/// sum_m y_m^T P v_m for one shared permutation.
double shared_objective(const Eigen::MatrixXd& y_cols, const Eigen::MatrixXd& v_cols, const PermutationMap& p);

/// Best of the M per-column constrained optima and the incumbent under the
/// shared objective. The incumbent is kept unless a candidate strictly beats
/// it, so the result never scores below the incumbent.
PermutationMap select_shared_permutation(const Eigen::MatrixXd& y_cols, const Eigen::MatrixXd& v_cols,
                                         const AnchorMap& anchors, const PermutationMap& incumbent);

}  // namespace permsbl
