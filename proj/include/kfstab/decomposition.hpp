#pragma once

#include <Eigen/Dense>

#include "kfstab/kfilter.hpp"
#include "kfstab/linalg.hpp"

namespace kfstab {

namespace oracle {
struct ExtendedSystem;
}

/// Orthogonal change of coordinates [z_a; z_b] = T_z z obtained from the SVD
/// of the Gram matrix of the filtered signal. The first `l` rows of T_z span
/// the excited directions; the remaining rows annihilate the Gram matrix.
struct Decomposition {
  Eigen::MatrixXd t_z;     // n_z x n_z, orthogonal
  int l = 0;               // numerical rank of the Gram matrix
  Eigen::VectorXd sigma0;  // l leading singular values, non-increasing
  Eigen::MatrixXd gram;    // n_z x n_z

  Eigen::MatrixXd t_a() const { return t_z.topRows(l); }
  Eigen::MatrixXd t_b() const { return t_z.bottomRows(t_z.rows() - l); }
};

/// Per-sample weighting of the Gram integral. Both choices have the same
/// column space; `normalized` divides each sample by |z(t)|^2, which keeps
/// exponentially growing data from masking the other directions.
enum class GramWeighting {
  uniform,
  normalized,
};

/// Trapezoidal approximation of the integral of z z^T over the trajectory.
Eigen::MatrixXd gram_matrix(const FilteredTrajectory& traj,
                            GramWeighting weighting = GramWeighting::uniform);

/// Square-root factor R (n_z x n_z) with R^T R equal to gram_matrix(traj, weighting),
/// computed by QR of the weighted data without forming the Gram matrix.
struct GramFactor {
  Eigen::MatrixXd r;
};

GramFactor gram_factor(const FilteredTrajectory& traj,
                       GramWeighting weighting = GramWeighting::normalized);

/// l counts singular values of `gram` above rel_tol * sigma_1.
Decomposition algorithm1(const Eigen::MatrixXd& gram,
                         double rel_tol = linalg::kDefaultRankTol);

/// Same decomposition from the factor. l counts singular values of R (the
/// square roots of those of the Gram) above rel_tol times the largest.
Decomposition algorithm1(const GramFactor& factor,
                         double rel_tol = linalg::kDefaultRankTol);

struct SplitSignals {
  Eigen::MatrixXd z_a;      // l x T
  Eigen::MatrixXd z_a_dot;  // l x T
};

/// z_a = T_a z and z_a' = T_a z' at every trajectory sample.
SplitSignals split_signals(const FilteredTrajectory& traj, const Decomposition& dec);

/// Blocks of T_z A_e T_z^T and T_z B_e checked against the true extended system.
struct DecompositionReport {
  double a_ba_norm = 0.0;
  double b_b_norm = 0.0;
  double a_b_abscissa = 0.0;  // -inf when the b-block is empty
  double a_e_norm = 0.0;
  /// Largest principal angle between the reachable subspace of (A_e, B_e)
  /// and the column space of the Gram matrix.
  double reachable_angle = 0.0;
};

DecompositionReport verify_decomposition(const oracle::ExtendedSystem& ext,
                                         const Decomposition& dec,
                                         double tol = linalg::kDefaultRankTol);

}  // namespace kfstab
