#pragma once

#include "permsbl/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace permsbl::detail {

/// Cholesky factor of a symmetric positive definite matrix. On failure the
/// diagonal is loaded with growing jitter, starting at 1e-10 * trace / n.
class SpdFactor {
 public:
  SpdFactor() = default;
  explicit SpdFactor(const Eigen::MatrixXd& a, const char* what = "matrix") { compute(a, what); }

  void compute(const Eigen::MatrixXd& a, const char* what = "matrix") {
    jittered_ = false;
    llt_.compute(a);
    if (ok()) return;
    const double n = static_cast<double>(std::max<Eigen::Index>(a.rows(), 1));
    double jitter = 1e-10 * std::max(std::abs(a.trace()) / n, 1e-300);
    for (int attempt = 0; attempt < 8; ++attempt, jitter *= 100.0) {
      Eigen::MatrixXd loaded = a;
      loaded.diagonal().array() += jitter;
      llt_.compute(loaded);
      if (ok()) {
        jittered_ = true;
        return;
      }
    }
    throw NumericalError(std::string("factorization of ") + what + " failed after jitter");
  }

  template <typename Rhs>
  Eigen::MatrixXd solve(const Rhs& b) const {
    return llt_.solve(b);
  }

  double log_det() const { return 2.0 * llt_.matrixLLT().diagonal().array().log().sum(); }
  bool jittered() const { return jittered_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

 private:
  bool ok() const {
    return llt_.info() == Eigen::Success && (llt_.matrixLLT().diagonal().array() > 0.0).all() &&
           llt_.matrixLLT().diagonal().allFinite();
  }

  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool jittered_ = false;
};

inline void symmetrize(Eigen::MatrixXd& a) {
  a = 0.5 * (a + a.transpose()).eval();
}

inline constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace permsbl::detail
