#include "permsbl/pksbl.hpp"

#include "em_driver.hpp"
#include "permsbl/errors.hpp"

#include <cmath>

namespace permsbl {

namespace {

// Diagonal moments from smoothed means, smoothed variance diagonals and
// lag-one covariance diagonals (entry 0 of `lag_var` unused).
SmoothedMoments moments_from_diagonals(const std::vector<Eigen::VectorXd>& mean,
                                       const std::vector<Eigen::VectorXd>& var,
                                       const std::vector<Eigen::VectorXd>& lag_var, double rho) {
  SmoothedMoments out;
  out.diag.reserve(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j) {
    Eigen::ArrayXd d = var[j].array() + mean[j].array().square();
    if (j > 0) {
      d += rho * rho * (var[j - 1].array() + mean[j - 1].array().square());
      d -= 2.0 * rho * (lag_var[j].array() + mean[j].array() * mean[j - 1].array());
    }
    out.diag.emplace_back(d.max(0.0).matrix());
  }
  return out;
}

Eigen::VectorXd gamma_from_moments(const SmoothedMoments& moments, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("gamma update requires 0 <= rho < 1");
  if (moments.diag.empty()) throw ConfigError("gamma update needs at least one column");
  Eigen::VectorXd g = moments.diag.front();
  const double scale = 1.0 / (1.0 - rho * rho);
  for (std::size_t j = 1; j < moments.diag.size(); ++j) g += scale * moments.diag[j];
  return g / static_cast<double>(moments.diag.size());
}

// E-step in the original coordinates; needed when Phi varies per column.
class DenseKalmanEStep {
 public:
  DenseKalmanEStep(const Eigen::MatrixXd& y, const MeasurementMatrix& phi, const SolverOptions& opts)
      : y_(y), phi_(phi), opts_(opts) {}

  detail::EStep operator()(const Eigen::VectorXd& gamma, const detail::RowAssignment& rows) const {
    const Index M = y_.cols();
    std::vector<KalmanStep> steps(static_cast<std::size_t>(M));
    for (Index m = 0; m < M; ++m) {
      const auto& r = rows[static_cast<std::size_t>(m)];
      const auto& phi = phi_.at(m);
      auto& step = steps[static_cast<std::size_t>(m)];
      const Index n = static_cast<Index>(r.obs.size());
      step.obs_matrix.resize(n, phi.cols());
      step.y.resize(n);
      for (Index k = 0; k < n; ++k) {
        step.obs_matrix.row(k) = phi.row(r.src[static_cast<std::size_t>(k)]);
        step.y(k) = y_(r.obs[static_cast<std::size_t>(k)], m);
      }
    }
    const KalmanState st = kalman_smoother(steps, gamma, opts_.rho, opts_.sigma2);

    detail::EStep out;
    out.mean.resize(gamma.size(), M);
    out.perm_mean.resize(gamma.size(), M);
    for (Index m = 0; m < M; ++m) {
      out.mean.col(m) = st.smooth_mean[static_cast<std::size_t>(m)];
      out.perm_mean.col(m) = opts_.perm_from_smoothed ? st.smooth_mean[static_cast<std::size_t>(m)]
                                                      : st.filt_mean[static_cast<std::size_t>(m)];
    }
    out.gamma_next = gamma_from_moments(smoothed_moments(st, opts_.rho), opts_.rho);
    out.log_evidence = st.log_likelihood;
    return out;
  }

 private:
  const Eigen::MatrixXd& y_;
  const MeasurementMatrix& phi_;
  const SolverOptions& opts_;
};

// E-step for a shared Phi. With x = Gamma^{1/2} z the prior on z is an
// isotropic AR(1) chain and every observation sees z only through the row
// space of Phi Gamma^{1/2}. Writing z = V a + V_perp b with V an orthonormal
// basis of that space, b is never observed and keeps its prior, so the
// filter and smoother run on the N-dimensional coordinate a.
class ReducedKalmanEStep {
 public:
  ReducedKalmanEStep(const Eigen::MatrixXd& y, const Eigen::MatrixXd& phi, const SolverOptions& opts)
      : y_(y), phi_(phi), opts_(opts) {}

  detail::EStep operator()(const Eigen::VectorXd& gamma, const detail::RowAssignment& rows) const {
    const Index L = phi_.cols(), N = phi_.rows(), M = y_.cols();
    const double rho = opts_.rho;
    const Eigen::VectorXd scale = gamma.cwiseSqrt();
    const Eigen::MatrixXd w = scale.asDiagonal() * phi_.transpose();  // Gamma^{1/2} Phi^T
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(L, N);
    const Eigen::MatrixXd reduced = w.transpose() * basis;  // Phi Gamma^{1/2} V

    std::vector<KalmanStep> steps(static_cast<std::size_t>(M));
    for (Index m = 0; m < M; ++m) {
      const auto& r = rows[static_cast<std::size_t>(m)];
      auto& step = steps[static_cast<std::size_t>(m)];
      const Index n = static_cast<Index>(r.obs.size());
      step.obs_matrix.resize(n, N);
      step.y.resize(n);
      for (Index k = 0; k < n; ++k) {
        step.obs_matrix.row(k) = reduced.row(r.src[static_cast<std::size_t>(k)]);
        step.y(k) = y_(r.obs[static_cast<std::size_t>(k)], m);
      }
    }
    const KalmanState st = kalman_smoother(steps, Eigen::VectorXd::Ones(N), rho, opts_.sigma2);

    // Unobserved complement: unit prior variance, lag-one covariance rho.
    const Eigen::ArrayXd complement = (1.0 - basis.rowwise().squaredNorm().array()).max(0.0);
    auto diag_of = [&](const Eigen::MatrixXd& c) -> Eigen::ArrayXd {
      return ((basis * c).array() * basis.array()).rowwise().sum();
    };

    detail::EStep out;
    out.mean.resize(L, M);
    out.perm_mean.resize(L, M);
    std::vector<Eigen::VectorXd> mean(static_cast<std::size_t>(M)), var(static_cast<std::size_t>(M)),
        lag(static_cast<std::size_t>(M));
    for (Index m = 0; m < M; ++m) {
      const auto j = static_cast<std::size_t>(m);
      mean[j] = scale.cwiseProduct(basis * st.smooth_mean[j]);
      out.mean.col(m) = mean[j];
      out.perm_mean.col(m) =
          opts_.perm_from_smoothed ? mean[j] : Eigen::VectorXd(scale.cwiseProduct(basis * st.filt_mean[j]));
      var[j] = (gamma.array() * (diag_of(st.smooth_cov[j]) + complement)).matrix();
      if (m > 0) lag[j] = (gamma.array() * (diag_of(st.lag_one_cov[j]) + rho * complement)).matrix();
    }
    out.gamma_next = gamma_from_moments(moments_from_diagonals(mean, var, lag, rho), rho);
    out.log_evidence = st.log_likelihood;
    return out;
  }

 private:
  const Eigen::MatrixXd& y_;
  const Eigen::MatrixXd& phi_;
  const SolverOptions& opts_;
};

}  // namespace

SmoothedMoments smoothed_moments(const KalmanState& st, double rho) {
  const std::size_t M = st.steps();
  if (st.smooth_mean.size() != M) throw ConfigError("smoothed_moments requires a smoothed state");
  std::vector<Eigen::VectorXd> var(M), lag(M);
  for (std::size_t j = 0; j < M; ++j) {
    var[j] = st.smooth_cov[j].diagonal();
    if (j > 0) {
      if (st.lag_one_cov.size() != M) throw ConfigError("smoothed_moments requires lag-one covariances");
      lag[j] = st.lag_one_cov[j].diagonal();
    }
  }
  return moments_from_diagonals(st.smooth_mean, var, lag, rho);
}

HyperParams update_gamma_ar(const SmoothedMoments& moments, double rho, double floor_eps) {
  HyperParams hp{gamma_from_moments(moments, rho), floor_eps};
  hp.apply_floor();
  return hp;
}

HyperParams update_gamma_ar(const KalmanState& state, double rho, double floor_eps) {
  return update_gamma_ar(smoothed_moments(state, rho), rho, floor_eps);
}

std::vector<KalmanStep> observation_steps(const Eigen::MatrixXd& y, const MeasurementMatrix& phi,
                                          std::span<const PermutationMap> perms) {
  if (static_cast<Index>(perms.size()) != y.cols()) throw ConfigError("observation_steps: need one map per column");
  std::vector<KalmanStep> steps(perms.size());
  for (Index m = 0; m < y.cols(); ++m) {
    const auto& p = perms[static_cast<std::size_t>(m)];
    const auto& a = phi.at(m);
    auto& step = steps[static_cast<std::size_t>(m)];
    step.obs_matrix.resize(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i) step.obs_matrix.row(i) = a.row(p.source(i));
    step.y = y.col(m);
  }
  return steps;
}

SolverResult run_pksbl(const Eigen::MatrixXd& y, const MeasurementMatrix& phi, std::span<const AnchorMap> anchors,
                       const SolverOptions& opts) {
  if (!(opts.rho >= 0.0 && opts.rho < 1.0))
    throw ConfigError("rho = 1 is unsupported: the gamma update divides by 1 - rho^2");
  if (phi.time_varying()) return detail::run_em(y, phi, anchors, opts, DenseKalmanEStep(y, phi, opts));
  return detail::run_em(y, phi, anchors, opts, ReducedKalmanEStep(y, phi.entries, opts));
}

}  // namespace permsbl
