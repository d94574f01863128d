#include "permsbl/permutation.hpp"

#include "permsbl/errors.hpp"

#include <algorithm>
#include <numeric>

namespace permsbl {

namespace {

// Indices of `idx` ordered by descending value, stable in index order.
std::vector<Index> descending_order(std::vector<Index> idx, const Eigen::VectorXd& values) {
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return values(a) > values(b); });
  return idx;
}

}  // namespace

void PermObjective::validate() const {
  if (y.size() != v.size()) throw std::invalid_argument("objective vectors differ in length");
}

double perm_objective(const PermObjective& obj, const PermutationMap& p) {
  obj.validate();
  double total = 0.0;
  for (Index i = 0; i < p.size(); ++i) total += obj.y(i) * obj.v(p.source(i));
  return total;
}

PermutationMap rearrangement_argmax(const PermObjective& obj) {
  obj.validate();
  return constrained_rearrangement_argmax(obj, AnchorMap(obj.y.size()));
}

PermutationMap constrained_rearrangement_argmax(const PermObjective& obj, const AnchorMap& anchors) {
  obj.validate();
  const Index n = obj.y.size();
  if (anchors.size() != n) throw InvalidAnchorError("anchor map size differs from objective length");

  std::vector<Index> p(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    if (anchors.anchored(i)) p[static_cast<std::size_t>(i)] = anchors.source(i);

  const auto obs = descending_order(anchors.free_observations(), obj.y);
  const auto src = descending_order(anchors.free_sources(), obj.v);
  for (std::size_t k = 0; k < obs.size(); ++k) p[static_cast<std::size_t>(obs[k])] = src[k];
  return PermutationMap(std::move(p));
}

PermutationMap brute_force_argmax(const PermObjective& obj, const AnchorMap& anchors) {
  obj.validate();
  const Index n = obj.y.size();
  if (anchors.size() != n) throw InvalidAnchorError("anchor map size differs from objective length");
  const auto obs = anchors.free_observations();
  auto src = anchors.free_sources();
  if (static_cast<Index>(obs.size()) > kBruteForceMaxFree)
    throw SizeGuardError("brute force limited to " + std::to_string(kBruteForceMaxFree) + " free indices");

  std::vector<Index> p(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    if (anchors.anchored(i)) p[static_cast<std::size_t>(i)] = anchors.source(i);

  // Free observations ascending, so lexicographic order of `src` matches the
  // lexicographic order of the full maps.
  std::vector<Index> best;
  double best_value = 0.0;
  do {
    for (std::size_t k = 0; k < obs.size(); ++k) p[static_cast<std::size_t>(obs[k])] = src[k];
    double value = 0.0;
    for (Index i = 0; i < n; ++i) value += obj.y(i) * obj.v(p[static_cast<std::size_t>(i)]);
    if (best.empty() || value > best_value) {
      best = p;
      best_value = value;
    }
  } while (std::next_permutation(src.begin(), src.end()));
  return PermutationMap(std::move(best));
}

double shared_objective(const Eigen::MatrixXd& y_cols, const Eigen::MatrixXd& v_cols, const PermutationMap& p) {
  double total = 0.0;
  for (Index m = 0; m < y_cols.cols(); ++m)
    for (Index i = 0; i < p.size(); ++i) total += y_cols(i, m) * v_cols(p.source(i), m);
  return total;
}

PermutationMap select_shared_permutation(const Eigen::MatrixXd& y_cols, const Eigen::MatrixXd& v_cols,
                                         const AnchorMap& anchors, const PermutationMap& incumbent) {
  if (y_cols.rows() != v_cols.rows() || y_cols.cols() != v_cols.cols())
    throw std::invalid_argument("observation and prediction blocks differ in shape");
  PermutationMap best = incumbent;
  double best_value = shared_objective(y_cols, v_cols, incumbent);
  for (Index m = 0; m < y_cols.cols(); ++m) {
    auto candidate = constrained_rearrangement_argmax({y_cols.col(m), v_cols.col(m)}, anchors);
    if (candidate == best) continue;
    const double value = shared_objective(y_cols, v_cols, candidate);
    if (value > best_value) {
      best = std::move(candidate);
      best_value = value;
    }
  }
  return best;
}

}  // namespace permsbl
