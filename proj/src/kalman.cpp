#include "permsbl/kalman.hpp"

#include "linalg.hpp"
#include "permsbl/errors.hpp"

namespace permsbl {

KalmanState kalman_forward(std::span<const KalmanStep> steps, const Eigen::VectorXd& prior_var, double rho,
                           double sigma2) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  const Index d = prior_var.size();
  const std::size_t M = steps.size();

  KalmanState st;
  st.pred_mean.reserve(M);
  st.pred_cov.reserve(M);
  st.filt_mean.reserve(M);
  st.filt_cov.reserve(M);
  st.gain.reserve(M);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd cov = prior_var.asDiagonal();
  const double drive = 1.0 - rho * rho;

  for (const auto& step : steps) {
    if (step.obs_matrix.cols() != d || step.obs_matrix.rows() != step.y.size())
      throw ConfigError("kalman_forward: observation shapes inconsistent with state dimension");

    Eigen::VectorXd pm = rho * mean;
    Eigen::MatrixXd pc = (rho * rho) * cov;
    pc.diagonal() += drive * prior_var;
    detail::symmetrize(pc);

    const auto& h = step.obs_matrix;
    const Index n = h.rows();
    Eigen::MatrixXd gain = Eigen::MatrixXd::Zero(d, n);
    if (n > 0) {
      const Eigen::MatrixXd hp = h * pc;  // H Sigma_{m|m-1}
      Eigen::MatrixXd s = hp * h.transpose();
      s.diagonal().array() += sigma2;
      const detail::SpdFactor chol(s, "innovation covariance");
      st.regularized = st.regularized || chol.jittered();
      gain = chol.solve(hp).transpose();
      const Eigen::VectorXd innovation = step.y - h * pm;
      mean = pm + gain * innovation;
      cov = pc - gain * hp;  // (I - G H) Sigma_{m|m-1}
      detail::symmetrize(cov);
      const Eigen::VectorXd whitened = chol.solve(innovation);
      st.log_likelihood +=
          -0.5 * (static_cast<double>(n) * detail::kLog2Pi + chol.log_det() + innovation.dot(whitened));
    } else {
      mean = pm;
      cov = pc;
    }
    st.pred_mean.push_back(std::move(pm));
    st.pred_cov.push_back(std::move(pc));
    st.filt_mean.push_back(mean);
    st.filt_cov.push_back(cov);
    st.gain.push_back(std::move(gain));
  }
  return st;
}

KalmanState rts_smooth(KalmanState st, double rho) {
  const std::size_t M = st.steps();
  if (M == 0) return st;
  const Index d = st.filt_mean.front().size();
  st.smooth_mean.assign(st.filt_mean.begin(), st.filt_mean.end());
  st.smooth_cov.assign(st.filt_cov.begin(), st.filt_cov.end());
  st.smoother_gain.assign(M, Eigen::MatrixXd());

  for (std::size_t j = M - 1; j >= 1; --j) {
    Eigen::MatrixXd gain;
    if (rho == 0.0) {
      gain = Eigen::MatrixXd::Zero(d, d);
    } else {
      const detail::SpdFactor chol(st.pred_cov[j], "prediction covariance");
      st.regularized = st.regularized || chol.jittered();
      // J = rho Sigma_f Sigma_pred^{-1} = (Sigma_pred^{-1} rho Sigma_f)^T by symmetry.
      gain = chol.solve(rho * st.filt_cov[j - 1]).transpose();
    }
    st.smooth_mean[j - 1] = st.filt_mean[j - 1] + gain * (st.smooth_mean[j] - st.pred_mean[j]);
    Eigen::MatrixXd cov = st.filt_cov[j - 1] + gain * (st.smooth_cov[j] - st.pred_cov[j]) * gain.transpose();
    detail::symmetrize(cov);
    st.smooth_cov[j - 1] = std::move(cov);
    st.smoother_gain[j - 1] = std::move(gain);
  }
  return st;
}

std::vector<Eigen::MatrixXd> lag_one_covariances(const KalmanState& st, std::span<const KalmanStep> steps,
                                                 double rho) {
  const std::size_t M = st.steps();
  if (st.smoother_gain.size() != M) throw ConfigError("lag_one_covariances requires a smoothed state");
  if (steps.size() != M) throw ConfigError("lag_one_covariances: step count mismatch");
  std::vector<Eigen::MatrixXd> lag(M);
  if (M < 2) return lag;
  const Index d = st.filt_mean.front().size();

  const auto& h_last = steps[M - 1].obs_matrix;
  Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(d, d);
  if (h_last.rows() > 0) ikh -= st.gain[M - 1] * h_last;
  lag[M - 1] = rho * ikh * st.filt_cov[M - 2];

  for (std::size_t j = M - 1; j >= 2; --j) {
    const auto& j_prev = st.smoother_gain[j - 1];  // J_{j-1}
    const auto& j_prev2 = st.smoother_gain[j - 2];  // J_{j-2}
    lag[j - 1] = st.filt_cov[j - 1] * j_prev2.transpose() +
                 j_prev * (lag[j] - rho * st.filt_cov[j - 1]) * j_prev2.transpose();
  }
  return lag;
}

KalmanState kalman_smoother(std::span<const KalmanStep> steps, const Eigen::VectorXd& prior_var, double rho,
                            double sigma2) {
  KalmanState st = rts_smooth(kalman_forward(steps, prior_var, rho, sigma2), rho);
  st.lag_one_cov = lag_one_covariances(st, steps, rho);
  return st;
}

}  // namespace permsbl
