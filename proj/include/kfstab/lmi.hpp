#pragma once

#include <string>
#include <variant>

#include <Eigen/Dense>

namespace kfstab::lmi {

/// Find Q (N x l) with
///   Z_a Q = Q^T Z_a^T >= epsilon I,
///   Zdot_a Q + Q^T Zdot_a^T <= -epsilon I.
struct StabilizationLmi {
  Eigen::MatrixXd z_a;      // l x N
  Eigen::MatrixXd z_a_dot;  // l x N
  double epsilon = 0.0;
  /// Optional margin alpha >= 0: additionally require
  /// Zdot_a Q + Q^T Zdot_a^T + 2 alpha Z_a Q < 0, so that every closed-loop
  /// eigenvalue has real part below -alpha. Zero gives the plain LMI.
  double decay_rate = 0.0;
  /// Optional bound rho > 0 on the closed-loop eigenvalue moduli, imposed as
  /// [rho Z_a Q, -Zdot_a Q; -(Zdot_a Q)^T, rho Z_a Q] > 0. Zero disables it.
  double max_modulus = 0.0;

  int l() const { return static_cast<int>(z_a.rows()); }
  int samples() const { return static_cast<int>(z_a.cols()); }

  /// Throws DimensionError / PreconditionError on malformed data.
  void validate() const;
};

/// 1e-6 * max(||Z_a||, ||Zdot_a||) with spectral norms.
double default_epsilon(const Eigen::MatrixXd& z_a, const Eigen::MatrixXd& z_a_dot);

StabilizationLmi make_problem(Eigen::MatrixXd z_a, Eigen::MatrixXd z_a_dot);

/// Residuals of a candidate Q, recomputed by dense algebra.
struct LmiSolution {
  Eigen::MatrixXd q;
  double pd_residual = 0.0;      // min eig of sym(Z_a Q)
  double nd_residual = 0.0;      // max eig of Zdot_a Q + Q^T Zdot_a^T
  double symmetry_defect = 0.0;  // ||Z_a Q - (Z_a Q)^T||_F
  double zq_norm = 0.0;          // ||Z_a Q||_F

  /// True iff the residuals meet the margin `epsilon` up to the relative
  /// slack and Z_a Q is symmetric to 1e-8 relative.
  bool satisfies(double epsilon, double slack_tol) const;
};

struct Infeasible {
  std::string reason;
  /// Best certified upper bound on the normalized margin; <= 0 means no
  /// strictly feasible point exists (within the solver's bounds).
  double margin_bound = 0.0;
  int iterations = 0;
};

using LmiResult = std::variant<LmiSolution, Infeasible>;

struct SolverOptions {
  double slack_tol = 1e-3;
  /// Relative threshold below which directions of the data are treated as
  /// numerically absent when eliminating the null space of Z_a.
  double null_rank_tol = 1e-6;
  /// Normalized margins below this are declared infeasible.
  double infeasibility_tol = 1e-9;
  /// Stop once the duality-gap bound is below this fraction of the margin.
  double relative_gap = 1e-3;
  int max_outer_iterations = 60;
  int max_newton_iterations = 200;
  int max_bound_enlargements = 3;
};

/// Solves the stabilization LMI with a log-barrier path-following method on
/// an exact reparametrization of Q that enforces the symmetry constraint.
/// Deterministic for fixed inputs.
LmiResult solve(const StabilizationLmi& problem, const SolverOptions& options = {});

LmiSolution certify(const StabilizationLmi& problem, const Eigen::MatrixXd& q);

}  // namespace kfstab::lmi
