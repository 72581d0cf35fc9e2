#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace kfstab {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Eigenvalues of a real square matrix together with its spectral abscissa.
struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  double abscissa = 0.0;  // max real part
};

/// Result of a rank-revealing SVD.
struct RankedSvd {
  MatrixXd u;
  VectorXd singular_values;  // non-increasing
  int rank = 0;
};

namespace linalg {

/// Default relative singular-value threshold for numerical rank decisions.
inline constexpr double kDefaultRankTol = 1e-8;

MatrixXd kron(const MatrixRef& a, const MatrixRef& b);

/// Stacks the columns of `a` into one column vector.
VectorXd vec(const MatrixRef& a);

/// Inverse of vec: reshapes a vector of length rows*cols column-major.
MatrixXd unvec(const Eigen::Ref<const VectorXd>& v, int rows, int cols);

/// e^{a t}, scaling-and-squaring with a degree-13 diagonal Padé approximant.
MatrixXd expm(const MatrixRef& a, double t = 1.0);

/// All eigenvalues of a square real matrix. Throws ConvergenceError when the
/// QR iteration does not converge.
Spectrum eigvals(const MatrixRef& a);

double spectral_abscissa(const MatrixRef& a);

/// Full SVD with rank = #{sigma_i > rel_tol * sigma_1}.
RankedSvd svd_rank(const MatrixRef& a, double rel_tol = kDefaultRankTol);

/// Numerical rank of an arbitrary (possibly complex) matrix.
int numerical_rank(const MatrixRef& a, double rel_tol = kDefaultRankTol);
int numerical_rank(const Eigen::Ref<const Eigen::MatrixXcd>& a,
                   double rel_tol = kDefaultRankTol);

/// Orthonormal basis of the column space of `a` (rank at rel_tol).
MatrixXd orth(const MatrixRef& a, double rel_tol = kDefaultRankTol);

/// Orthonormal basis of the null space of `a` (rank at rel_tol).
MatrixXd null_space(const MatrixRef& a, double rel_tol = kDefaultRankTol);

/// Solves X a - f X = q by complex Schur reduction of both coefficients,
/// followed by one step of iterative refinement.
/// Throws SingularEquationError if a and f share an eigenvalue.
MatrixXd solve_sylvester(const MatrixRef& a, const MatrixRef& f,
                         const MatrixRef& q);

/// True iff the spectral abscissa of `a` is below -margin.
bool is_hurwitz(const MatrixRef& a, double margin = 0.0);

/// PBH test: rank [lambda I - a | b] = dim(a) at every eigenvalue lambda of
/// `a` with non-negative real part.
bool pbh_stabilizable(const MatrixRef& a, const MatrixRef& b,
                      double tol = kDefaultRankTol);

/// Kalman controllability matrix [b, ab, ..., a^{n-1} b].
MatrixXd controllability_matrix(const MatrixRef& a, const MatrixRef& b);

/// Orthonormal basis of the reachable subspace of (a, b), grown by
/// orthogonalized Krylov iteration instead of forming raw powers of a.
MatrixXd reachable_subspace(const MatrixRef& a, const MatrixRef& b,
                            double rel_tol = kDefaultRankTol);

/// Largest principal angle (radians) between span(inner) and span(outer),
/// measured from inner into outer. Both arguments need orthonormal columns.
double max_principal_angle(const MatrixRef& inner, const MatrixRef& outer);

/// 2-norm condition number.
double condition_number(const MatrixRef& a);

void require_square(const MatrixRef& a, const char* what);

}  // namespace linalg
}  // namespace kfstab
