#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kfstab/simulation.hpp"

namespace kfstab {

/// Kreisselmeier filter M' = F M + [y^T (x) I_n, u^T (x) I_n] and its
/// vectorized form  vec(M)' = F_xi vec(M) + B_xi u + L_xi y.
struct FilterBank {
  Eigen::MatrixXd f;  // n x n, diagonal Hurwitz with distinct entries
  int n = 0;
  int m = 0;
  int p = 0;
  int mu = 0;    // (p + m) n
  int n_xi = 0;  // n mu
  Eigen::MatrixXd f_xi;  // I_mu (x) F
  Eigen::MatrixXd b_xi;  // [0_{p n^2 x m}; I_m (x) vec(I_n)]
  Eigen::MatrixXd l_xi;  // [I_p (x) vec(I_n); 0_{m n^2 x p}]

  int n_z() const { return n + n_xi; }
};

/// Throws PreconditionError unless f is diagonal with distinct negative entries.
void require_filter_matrix(const Eigen::MatrixXd& f);

FilterBank build_filter(int n, int m, int p, const Eigen::MatrixXd& f);

/// F M + [y^T (x) I_n, u^T (x) I_n] for an n x mu filter state.
Eigen::MatrixXd filter_rhs(const FilterBank& bank, const Eigen::MatrixXd& m_state,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& y);

/// F_xi vec(M) + B_xi u + L_xi y.
Eigen::VectorXd filter_rhs_vectorized(const FilterBank& bank, const Eigen::VectorXd& vec_m,
                                      const Eigen::VectorXd& u, const Eigen::VectorXd& y);

/// Auxiliary dynamics chi' = Lambda chi that carries the transverse coordinate.
Eigen::VectorXd chi_rhs(const Eigen::MatrixXd& lambda, const Eigen::VectorXd& chi);

/// Filter output sampled on the dataset grid. z = (chi, vec M).
struct FilteredTrajectory {
  std::vector<double> times;
  Eigen::MatrixXd z;      // n_z x T
  Eigen::MatrixXd z_dot;  // n_z x T, analytic right-hand sides
  int n = 0;

  int n_z() const { return static_cast<int>(z.rows()); }
  int size() const { return static_cast<int>(times.size()); }
};

/// How u and y are reconstructed between dataset samples while integrating.
enum class InterSample {
  zero_order_hold,
  cubic,  // 4-point Lagrange interpolation on the sample grid
};

/// Runs the filter and the chi dynamics over the dataset with fixed-step RK4
/// from M(0) = 0, chi(0) = 1. z_dot is the right-hand side at each sample.
FilteredTrajectory postprocess(const Dataset& dataset, const FilterBank& bank, double step,
                               InterSample hold = InterSample::cubic);

}  // namespace kfstab
