#pragma once

#include <Eigen/Dense>

namespace kfstab {

/// Continuous-time LTI plant  x' = a x + b u,  y = c x.
struct ContinuousLTISystem {
  Eigen::MatrixXd a;  // n x n
  Eigen::MatrixXd b;  // n x m
  Eigen::MatrixXd c;  // p x n

  int n() const { return static_cast<int>(a.rows()); }
  int m() const { return static_cast<int>(b.cols()); }
  int p() const { return static_cast<int>(c.rows()); }

  /// Throws DimensionError unless the three matrices conform and are finite.
  void validate() const;
};

/// Dynamic output-feedback law built around the Kreisselmeier filter:
///   M' = F M + [y^T (x) I_n, u^T (x) I_n],  M(0) = 0,
///   u  = K_e [0_n; vec(M)].
struct Controller {
  Eigen::MatrixXd f;    // n x n filter matrix
  Eigen::MatrixXd k_e;  // m x (n + n^2 (p + m))
  int n = 0;
  int m = 0;
  int p = 0;

  int mu() const { return (p + m) * n; }
  int n_xi() const { return n * mu(); }
  int n_z() const { return n + n_xi(); }

  /// Feedback of the filter state. The chi-block columns of K_e are ignored.
  Eigen::VectorXd control(const Eigen::Ref<const Eigen::VectorXd>& vec_m) const {
    return k_e.rightCols(n_xi()) * vec_m;
  }

  void validate() const;
};

}  // namespace kfstab
