#pragma once

// EM skeleton shared by the independent-column and the AR(1) solvers. The
// E-step engine is the only thing that differs between them.

#include "permsbl/em.hpp"
#include "permsbl/errors.hpp"
#include "permsbl/model.hpp"
#include "permsbl/permutation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <span>
#include <vector>

namespace permsbl::detail {

/// Observed rows of one column: y(obs[k], m) was produced by Phi row src[k].
struct ColumnRows {
  std::vector<Index> obs;
  std::vector<Index> src;
};
using RowAssignment = std::vector<ColumnRows>;

struct EStep {
  Eigen::MatrixXd mean;            // L x M, reported estimate
  Eigen::MatrixXd perm_mean;       // L x M, predictor fed to the permutation update
  Eigen::VectorXd gamma_next;      // maximizer of the gamma part of Q, before flooring
  double log_evidence = 0.0;
};

inline RowAssignment full_rows(std::span<const PermutationMap> perms) {
  RowAssignment rows(perms.size());
  for (std::size_t m = 0; m < perms.size(); ++m) {
    const auto& p = perms[m];
    rows[m].obs.resize(static_cast<std::size_t>(p.size()));
    rows[m].src.resize(static_cast<std::size_t>(p.size()));
    for (Index i = 0; i < p.size(); ++i) {
      rows[m].obs[static_cast<std::size_t>(i)] = i;
      rows[m].src[static_cast<std::size_t>(i)] = p.source(i);
    }
  }
  return rows;
}

inline RowAssignment anchored_rows(std::span<const AnchorMap> anchors) {
  RowAssignment rows(anchors.size());
  for (std::size_t m = 0; m < anchors.size(); ++m) {
    for (Index i = 0; i < anchors[m].size(); ++i) {
      if (!anchors[m].anchored(i)) continue;
      rows[m].obs.push_back(i);
      rows[m].src.push_back(anchors[m].source(i));
    }
  }
  return rows;
}

inline double relative_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev, double floor_eps) {
  const double scale = std::max(prev.lpNorm<Eigen::Infinity>(), floor_eps);
  return (next - prev).lpNorm<Eigen::Infinity>() / scale;
}

/// Expands a one-map anchor span to M maps and validates it against the mode.
inline std::vector<AnchorMap> expand_anchors(std::span<const AnchorMap> anchors, Index N, Index M, bool shared) {
  std::vector<AnchorMap> out;
  if (anchors.empty()) {
    out.assign(static_cast<std::size_t>(M), AnchorMap(N));
  } else if (anchors.size() == 1) {
    out.assign(static_cast<std::size_t>(M), anchors.front());
  } else if (static_cast<Index>(anchors.size()) == M) {
    out.assign(anchors.begin(), anchors.end());
  } else {
    throw ConfigError("expected one anchor map or one per column");
  }
  for (const auto& a : out)
    if (a.size() != N) throw ConfigError("anchor map size must equal N");
  if (shared && !std::all_of(out.begin(), out.end(), [&](const AnchorMap& a) { return a == out.front(); }))
    throw ConfigError("shared permutation mode requires identical anchors in every column");
  return out;
}

class PermutationUpdater {
 public:
  PermutationUpdater(const Eigen::MatrixXd& y, const MeasurementMatrix& phi, std::span<const AnchorMap> anchors,
                     const SolverOptions& opts)
      : y_(y), phi_(phi), opts_(opts) {
    for (const auto& a : anchors) constraints_.push_back(opts.anchors_enforced ? a : AnchorMap(a.size()));
  }

  std::vector<PermutationMap> operator()(const Eigen::MatrixXd& perm_mean,
                                         std::span<const PermutationMap> incumbent) const {
    const Index M = y_.cols();
    Eigen::MatrixXd v(y_.rows(), M);
    for (Index m = 0; m < M; ++m) v.col(m) = phi_.at(m) * perm_mean.col(m);
    std::vector<PermutationMap> out;
    out.reserve(static_cast<std::size_t>(M));
    if (opts_.shared_perm) {
      out.assign(static_cast<std::size_t>(M),
                 select_shared_permutation(y_, v, constraints_.front(), incumbent.front()));
    } else {
      for (Index m = 0; m < M; ++m)
        out.push_back(constrained_rearrangement_argmax({y_.col(m), v.col(m)},
                                                       constraints_[static_cast<std::size_t>(m)]));
    }
    return out;
  }

 private:
  const Eigen::MatrixXd& y_;
  const MeasurementMatrix& phi_;
  const SolverOptions& opts_;
  std::vector<AnchorMap> constraints_;
};

template <typename Engine>
SolverResult run_em(const Eigen::MatrixXd& y, const MeasurementMatrix& phi, std::span<const AnchorMap> anchor_span,
                    const SolverOptions& opts, Engine&& estep) {
  opts.validate();
  const Index N = y.rows(), M = y.cols(), L = phi.cols();
  if (phi.rows() != N) throw ConfigError("measurement matrix rows must equal observation rows");
  if (M < 1) throw ConfigError("need at least one column");
  if (phi.time_varying() && static_cast<Index>(phi.per_column.size()) != M)
    throw ConfigError("per-column measurement matrices must number M");

  const auto anchors = expand_anchors(anchor_span, N, M, opts.shared_perm);
  const PermutationUpdater update_perms(y, phi, anchors, opts);

  SolverResult result;
  EMState& st = result.state;
  st.gamma = HyperParams::ones(L, opts.floor_eps);
  // All-zero data: the evidence is maximized by gamma -> 0.
  if (y.isZero(0.0)) st.gamma.gamma.setConstant(opts.floor_eps);

  std::vector<PermutationMap> completion;
  for (const auto& a : anchors) completion.push_back(a.ascending_completion());

  const Index anchored = anchors.front().count();
  const bool warm = opts.init == InitMode::kAnchorWarmStart && anchored > 0 && anchored < N;
  if (warm) {
    const auto rows = anchored_rows(anchors);
    EStep e;
    for (int it = 0; it < opts.warmup_max_iter; ++it) {
      e = estep(st.gamma.gamma, rows);
      st.warmup_trace.push_back(e.log_evidence);
      HyperParams next{e.gamma_next, opts.floor_eps};
      next.apply_floor();
      const double change = relative_change(next.gamma, st.gamma.gamma, opts.floor_eps);
      st.gamma = std::move(next);
      ++st.warmup_iters;
      if (change < opts.tol) break;
    }
    e = estep(st.gamma.gamma, rows);
    st.warmup_trace.push_back(e.log_evidence);
    st.perms = update_perms(e.perm_mean, completion);
  } else {
    st.perms = completion;
  }

  for (int it = 0; it < opts.max_iter; ++it) {
    const EStep e = estep(st.gamma.gamma, full_rows(st.perms));
    st.log_evidence_trace.push_back(e.log_evidence);
    HyperParams next{e.gamma_next, opts.floor_eps};
    next.apply_floor();
    auto perms = update_perms(e.perm_mean, st.perms);
    const double change = relative_change(next.gamma, st.gamma.gamma, opts.floor_eps);
    const bool same_perms = perms == st.perms;
    st.gamma = std::move(next);
    st.perms = std::move(perms);
    ++st.iter;
    if (change < opts.tol && same_perms) {
      st.converged = true;
      st.reason = StopReason::kTolerance;
      break;
    }
  }

  const EStep last = estep(st.gamma.gamma, full_rows(st.perms));
  st.log_evidence_trace.push_back(last.log_evidence);
  result.x_hat = last.mean;
  return result;
}

}  // namespace permsbl::detail
