#include "permsbl/somp.hpp"

#include "em_driver.hpp"
#include "permsbl/errors.hpp"
#include "permsbl/permutation.hpp"

#include <algorithm>

namespace permsbl {

SompFit somp_recover(const Eigen::MatrixXd& y_anchor, const Eigen::MatrixXd& phi_anchor, Index k_max) {
  const std::vector<Eigen::MatrixXd> dict(static_cast<std::size_t>(y_anchor.cols()), phi_anchor);
  return somp_recover(y_anchor, dict, k_max);
}

SompFit somp_recover(const Eigen::MatrixXd& y_anchor, std::span<const Eigen::MatrixXd> phi_anchor, Index k_max) {
  const Index B = y_anchor.rows(), M = y_anchor.cols();
  if (B < 1) throw ConfigError("S-OMP needs at least one anchored row");
  if (static_cast<Index>(phi_anchor.size()) != M) throw ConfigError("S-OMP needs one dictionary per column");
  const Index L = phi_anchor.front().cols();
  for (const auto& a : phi_anchor)
    if (a.rows() != B || a.cols() != L) throw ConfigError("S-OMP dictionaries must be B x L");

  SompFit fit;
  fit.x_hat = Eigen::MatrixXd::Zero(L, M);
  Eigen::MatrixXd residual = y_anchor;
  std::vector<bool> used(static_cast<std::size_t>(L), false);
  const Index steps = std::min(k_max, B);

  for (Index k = 0; k < steps; ++k) {
    if (residual.isZero(0.0)) break;
    Eigen::VectorXd score = Eigen::VectorXd::Zero(L);
    for (Index m = 0; m < M; ++m) {
      const auto& a = phi_anchor[static_cast<std::size_t>(m)];
      score += (a.transpose() * residual.col(m)).cwiseAbs();
    }
    Index best = -1;
    double best_score = -1.0;
    for (Index l = 0; l < L; ++l) {
      if (used[static_cast<std::size_t>(l)]) continue;
      double norm = 0.0;
      // Atom norms differ only for per-column dictionaries; average them.
      for (Index m = 0; m < M; ++m) norm += phi_anchor[static_cast<std::size_t>(m)].col(l).norm();
      norm /= static_cast<double>(M);
      if (norm == 0.0) continue;
      const double s = score(l) / norm;
      if (s > best_score) {
        best_score = s;
        best = l;
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    fit.support.push_back(best);

    const Index s = static_cast<Index>(fit.support.size());
    for (Index m = 0; m < M; ++m) {
      const auto& a = phi_anchor[static_cast<std::size_t>(m)];
      Eigen::MatrixXd sub(B, s);
      for (Index c = 0; c < s; ++c) sub.col(c) = a.col(fit.support[static_cast<std::size_t>(c)]);
      const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sub);
      if (cod.rank() < s) fit.rank_deficient = true;
      const Eigen::VectorXd coef = cod.solve(y_anchor.col(m));
      fit.x_hat.col(m).setZero();
      for (Index c = 0; c < s; ++c) fit.x_hat(fit.support[static_cast<std::size_t>(c)], m) = coef(c);
      residual.col(m) = y_anchor.col(m) - sub * coef;
    }
  }
  return fit;
}

std::vector<PermutationMap> one_shot_perm(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi,
                                          const Eigen::MatrixXd& x_hat, std::span<const AnchorMap> anchors,
                                          bool shared_perm) {
  const Index N = y.rows(), M = y.cols();
  const auto maps = detail::expand_anchors(anchors, N, M, shared_perm);
  const Eigen::MatrixXd v = phi * x_hat;
  std::vector<PermutationMap> out;
  if (shared_perm) {
    out.assign(static_cast<std::size_t>(M),
               select_shared_permutation(y, v, maps.front(), maps.front().ascending_completion()));
  } else {
    for (Index m = 0; m < M; ++m)
      out.push_back(constrained_rearrangement_argmax({y.col(m), v.col(m)}, maps[static_cast<std::size_t>(m)]));
  }
  return out;
}

SompResult run_somp(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi, std::span<const AnchorMap> anchors,
                    Index k_max, bool shared_perm) {
  const Index N = y.rows(), M = y.cols(), L = phi.cols();
  const auto maps = detail::expand_anchors(anchors, N, M, shared_perm);
  const Index B = maps.front().count();

  SompResult out;
  if (B == 0) {
    out.x_hat = Eigen::MatrixXd::Zero(L, M);
  } else {
    Eigen::MatrixXd y_anchor(B, M);
    std::vector<Eigen::MatrixXd> dict(static_cast<std::size_t>(M), Eigen::MatrixXd(B, L));
    for (Index m = 0; m < M; ++m) {
      const auto& a = maps[static_cast<std::size_t>(m)];
      if (a.count() != B) throw ConfigError("every column needs the same number of anchors");
      Index k = 0;
      for (Index i = 0; i < N; ++i) {
        if (!a.anchored(i)) continue;
        y_anchor(k, m) = y(i, m);
        dict[static_cast<std::size_t>(m)].row(k) = phi.row(a.source(i));
        ++k;
      }
    }
    SompFit fit = somp_recover(y_anchor, dict, k_max);
    out.support_est = std::move(fit.support);
    out.x_hat = std::move(fit.x_hat);
  }
  out.perms_est = one_shot_perm(y, phi, out.x_hat, maps, shared_perm);
  return out;
}

}  // namespace permsbl
