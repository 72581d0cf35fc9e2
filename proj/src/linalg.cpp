#include "kfstab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "kfstab/errors.hpp"

namespace kfstab::linalg {

void require_square(const MatrixRef& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw DimensionError(std::string(what) + ": expected a non-empty square matrix, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

MatrixXd kron(const MatrixRef& a, const MatrixRef& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

VectorXd vec(const MatrixRef& a) {
  VectorXd out(a.size());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    out.segment(j * a.rows(), a.rows()) = a.col(j);
  }
  return out;
}

MatrixXd unvec(const Eigen::Ref<const VectorXd>& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("unvec: length does not match requested shape");
  }
  MatrixXd out(rows, cols);
  for (int j = 0; j < cols; ++j) out.col(j) = v.segment(j * rows, rows);
  return out;
}

MatrixXd expm(const MatrixRef& a, double t) {
  require_square(a, "expm");
  const MatrixXd scaled = a * t;
  return scaled.exp();
}

Spectrum eigvals(const MatrixRef& a) {
  require_square(a, "eigvals");
  Eigen::EigenSolver<MatrixXd> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("eigvals: QR iteration did not converge");
  }
  Spectrum s;
  s.eigenvalues.reserve(a.rows());
  s.abscissa = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const std::complex<double> lambda = solver.eigenvalues()(i);
    s.eigenvalues.push_back(lambda);
    s.abscissa = std::max(s.abscissa, lambda.real());
  }
  return s;
}

double spectral_abscissa(const MatrixRef& a) { return eigvals(a).abscissa; }

namespace {

template <typename Singular>
int count_rank(const Singular& sv, double rel_tol) {
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  const double threshold = rel_tol * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > threshold) ++rank;
  }
  return rank;
}

}  // namespace

RankedSvd svd_rank(const MatrixRef& a, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) {
    throw PreconditionError("svd_rank: rel_tol must lie in (0, 1)");
  }
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullU);
  RankedSvd out;
  out.u = svd.matrixU();
  out.singular_values = svd.singularValues();
  out.rank = count_rank(out.singular_values, rel_tol);
  return out;
}

int numerical_rank(const MatrixRef& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(a);
  return count_rank(svd.singularValues(), rel_tol);
}

int numerical_rank(const Eigen::Ref<const Eigen::MatrixXcd>& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  return count_rank(svd.singularValues(), rel_tol);
}

MatrixXd orth(const MatrixRef& a, double rel_tol) {
  if (a.size() == 0) return MatrixXd(a.rows(), 0);
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU);
  const int r = count_rank(svd.singularValues(), rel_tol);
  return svd.matrixU().leftCols(r);
}

MatrixXd null_space(const MatrixRef& a, double rel_tol) {
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullV);
  const int r = count_rank(svd.singularValues(), rel_tol);
  return svd.matrixV().rightCols(a.cols() - r);
}

MatrixXd solve_sylvester(const MatrixRef& a, const MatrixRef& f,
                         const MatrixRef& q) {
  require_square(a, "solve_sylvester(a)");
  require_square(f, "solve_sylvester(f)");
  if (q.rows() != f.rows() || q.cols() != a.rows()) {
    throw DimensionError("solve_sylvester: q must be dim(f) x dim(a)");
  }
  using Eigen::MatrixXcd;
  Eigen::ComplexSchur<MatrixXd> schur_a(a);
  Eigen::ComplexSchur<MatrixXd> schur_f(f);
  if (schur_a.info() != Eigen::Success || schur_f.info() != Eigen::Success) {
    throw ConvergenceError("solve_sylvester: Schur decomposition failed");
  }
  const MatrixXcd& ua = schur_a.matrixU();
  const MatrixXcd& ta = schur_a.matrixT();
  const MatrixXcd& uf = schur_f.matrixU();
  const MatrixXcd& tf = schur_f.matrixT();

  // With a = Ua Ta Ua^H and f = Uf Tf Uf^H, Y = Uf^H X Ua solves
  // Y Ta - Tf Y = Uf^H q Ua, column by column since Ta is upper triangular.
  const MatrixXcd rhs = uf.adjoint() * q.cast<std::complex<double>>() * ua;
  const Eigen::Index n = a.rows();
  const Eigen::Index k = f.rows();
  const double scale = std::max({1.0, ta.cwiseAbs().maxCoeff(), tf.cwiseAbs().maxCoeff()});
  const double sep_tol = 1e3 * std::numeric_limits<double>::epsilon() * scale;

  const auto triangular_solve = [&](const MatrixXcd& rhs_t) {
    MatrixXcd y = MatrixXcd::Zero(k, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXcd c = rhs_t.col(j);
      for (Eigen::Index i = 0; i < j; ++i) c -= y.col(i) * ta(i, j);
      MatrixXcd sys = -tf;
      sys.diagonal().array() += ta(j, j);
      for (Eigen::Index i = 0; i < k; ++i) {
        if (std::abs(sys(i, i)) <= sep_tol) {
          throw SingularEquationError(
              "solve_sylvester: coefficient matrices share an eigenvalue");
        }
      }
      y.col(j) = sys.triangularView<Eigen::Upper>().solve(c);
    }
    return MatrixXd((uf * y * ua.adjoint()).real());
  };

  MatrixXd x = triangular_solve(rhs);
  // One refinement step with the residual accumulated in extended precision.
  using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LongMatrix xl = x.cast<long double>();
  const LongMatrix residual = xl * a.cast<long double>() - f.cast<long double>() * xl -
                              q.cast<long double>();
  const MatrixXd r = residual.cast<double>();
  x -= triangular_solve(uf.adjoint() * r.cast<std::complex<double>>() * ua);
  return x;
}

bool is_hurwitz(const MatrixRef& a, double margin) {
  return spectral_abscissa(a) < -margin;
}

bool pbh_stabilizable(const MatrixRef& a, const MatrixRef& b, double tol) {
  require_square(a, "pbh_stabilizable");
  if (b.rows() != a.rows()) throw DimensionError("pbh_stabilizable: b rows != dim(a)");
  const Spectrum s = eigvals(a);
  const Eigen::Index n = a.rows();
  for (const auto& lambda : s.eigenvalues) {
    if (lambda.real() < 0.0) continue;
    Eigen::MatrixXcd pencil(n, n + b.cols());
    pencil.leftCols(n) = -a.cast<std::complex<double>>();
    pencil.leftCols(n).diagonal().array() += lambda;
    pencil.rightCols(b.cols()) = b.cast<std::complex<double>>();
    if (numerical_rank(pencil, tol) < n) return false;
  }
  return true;
}

MatrixXd controllability_matrix(const MatrixRef& a, const MatrixRef& b) {
  require_square(a, "controllability_matrix");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  MatrixXd out(n, n * m);
  out.leftCols(m) = b;
  for (Eigen::Index i = 1; i < n; ++i) {
    out.middleCols(i * m, m) = a * out.middleCols((i - 1) * m, m);
  }
  return out;
}

MatrixXd reachable_subspace(const MatrixRef& a, const MatrixRef& b, double rel_tol) {
  require_square(a, "reachable_subspace");
  MatrixXd basis = orth(b, rel_tol);
  MatrixXd frontier = basis;
  while (frontier.cols() > 0 && basis.cols() < a.rows()) {
    MatrixXd next = a * frontier;
    const double ref = next.norm();
    // Two passes of Gram-Schmidt against the current basis.
    for (int pass = 0; pass < 2; ++pass) next -= basis * (basis.transpose() * next);
    Eigen::JacobiSVD<MatrixXd> svd(next, Eigen::ComputeThinU);
    int r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()(i) > rel_tol * ref) ++r;
    }
    frontier = svd.matrixU().leftCols(r);
    MatrixXd grown(a.rows(), basis.cols() + r);
    grown << basis, frontier;
    basis = std::move(grown);
  }
  return basis;
}

double max_principal_angle(const MatrixRef& inner, const MatrixRef& outer) {
  if (inner.cols() == 0) return 0.0;
  if (outer.cols() == 0) return M_PI / 2;
  const MatrixXd residual = inner - outer * (outer.transpose() * inner);
  Eigen::JacobiSVD<MatrixXd> svd(residual);
  const double s = std::min(1.0, svd.singularValues()(0));
  return std::asin(s);
}

double condition_number(const MatrixRef& a) {
  Eigen::JacobiSVD<MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double smallest = sv(sv.size() - 1);
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

}  // namespace kfstab::linalg
