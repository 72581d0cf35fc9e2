#include "kfstab/plant_oracle.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "kfstab/errors.hpp"

namespace kfstab::oracle {

Minimality check_minimality(const ContinuousLTISystem& sys, double tol) {
  sys.validate();
  const int n = sys.n();
  Minimality out;
  out.controllable = linalg::numerical_rank(linalg::controllability_matrix(sys.a, sys.b), tol) == n;
  out.observable =
      linalg::numerical_rank(linalg::controllability_matrix(sys.a.transpose(), sys.c.transpose()),
                             tol) == n;
  return out;
}

Embedding luenberger_embedding(const ContinuousLTISystem& sys, const Eigen::MatrixXd& f,
                               std::uint64_t seed) {
  sys.validate();
  if (f.rows() != sys.n() || f.cols() != sys.n()) {
    throw DimensionError("luenberger_embedding: F must be n x n");
  }
  require_filter_matrix(f);

  const Spectrum plant = linalg::eigvals(sys.a);
  const double scale = 1.0 + sys.a.norm() + f.norm();
  for (const auto& lambda : plant.eigenvalues) {
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      if (std::abs(lambda - f(i, i)) <= 1e-8 * scale) {
        throw PreconditionError("luenberger_embedding: spectra of A and F intersect");
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Embedding best;
  double best_gain = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < kEmbeddingAttempts; ++attempt) {
    Eigen::MatrixXd g(sys.n(), sys.p());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    }
    // X A - F X = G C  =>  X (A - X^{-1} G C) = F X.
    Eigen::MatrixXd x = linalg::solve_sylvester(sys.a, f, g * sys.c);
    // F is diagonal, so scaling row i of X and G together keeps the equation.
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double norm = x.row(i).norm();
      if (!(norm > 0.0)) break;
      x.row(i) /= norm;
      g.row(i) /= norm;
    }
    const double condition = linalg::condition_number(x);
    if (!(condition < kMaxEmbeddingCondition)) continue;
    // T L = G holds by construction; use it exactly.
    const Eigen::VectorXd tl = linalg::vec(g);
    const Eigen::VectorXd tb = linalg::vec(x * sys.b);
    Eigen::VectorXd theta(tl.size() + tb.size());
    theta << tl, tb;
    const Eigen::MatrixXd x_inv = x.inverse();
    // ||Pi||_F = ||theta|| ||T^{-1}||_F.
    const double gain = theta.norm() * x_inv.norm();
    if (!(gain < best_gain)) continue;
    best_gain = gain;
    best.t_mat = x;
    best.l_mat = x_inv * g;
    best.f = f;
    best.theta = theta;
  }
  if (!std::isfinite(best_gain)) {
    throw ObservabilityError(
        "luenberger_embedding: every draw produced an ill-conditioned similarity");
  }
  return best;
}

NonMinimalRealization canonical_realization(const ContinuousLTISystem& sys,
                                            const Embedding& emb) {
  const FilterBank bank = build_filter(sys.n(), sys.m(), sys.p(), emb.f);
  const Eigen::MatrixXd t_inv = emb.t_mat.inverse();

  NonMinimalRealization nmr;
  nmr.f_xi = bank.f_xi;
  nmr.b_xi = bank.b_xi;
  nmr.l_xi = bank.l_xi;
  nmr.pi = linalg::kron(emb.theta.transpose(), t_inv);
  nmr.c_xi = sys.c * nmr.pi;
  nmr.a_xi = nmr.f_xi + nmr.l_xi * nmr.c_xi;
  return nmr;
}

ExtendedSystem extended_system(const ContinuousLTISystem& sys, const Embedding& emb,
                               const NonMinimalRealization& nmr, const Eigen::VectorXd& x0) {
  if (x0.size() != sys.n()) throw DimensionError("extended_system: x0 has wrong length");
  const int n = sys.n();
  const int n_xi = static_cast<int>(nmr.a_xi.rows());

  // M(0) = 0 gives beta(0) = T x0; with F diagonal, beta(t) = diag(beta(0)) chi(t).
  ExtendedSystem ext;
  ext.gamma = (emb.t_mat * x0).asDiagonal();
  ext.a_e = Eigen::MatrixXd::Zero(n + n_xi, n + n_xi);
  ext.a_e.topLeftCorner(n, n) = emb.f;
  ext.a_e.bottomLeftCorner(n_xi, n) =
      nmr.l_xi * sys.c * emb.t_mat.partialPivLu().solve(ext.gamma);
  ext.a_e.bottomRightCorner(n_xi, n_xi) = nmr.a_xi;
  ext.b_e = Eigen::MatrixXd::Zero(n + n_xi, sys.m());
  ext.b_e.bottomRows(n_xi) = nmr.b_xi;
  return ext;
}

ContinuousLTISystem random_minimal_system(int n, int m, int p, std::uint64_t seed) {
  if (n < 1 || m < 1 || p < 1) throw DimensionError("random_minimal_system: n, m, p >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto draw = [&](int rows, int cols) {
    Eigen::MatrixXd out(rows, cols);
    for (int j = 0; j < cols; ++j) {
      for (int i = 0; i < rows; ++i) out(i, j) = normal(rng);
    }
    return out;
  };
  for (int attempt = 0; attempt < kMaxSystemDraws; ++attempt) {
    ContinuousLTISystem sys{draw(n, n), draw(n, m), draw(p, n)};
    if (check_minimality(sys).minimal()) return sys;
  }
  throw SamplingError("random_minimal_system: no minimal draw within the attempt budget");
}

ContinuousLTISystem example1() {
  ContinuousLTISystem sys;
  sys.a.resize(3, 3);
  sys.b.resize(3, 2);
  sys.c.resize(2, 3);
  // clang-format off
  sys.a << 1, 2, 0,
           0, 2, 1,
           3, 0, 1;
  sys.b << 1, 0,
           0, 1,
           1, 2;
  sys.c << 1, 0, 2,
           0, 1, 1;
  // clang-format on
  return sys;
}

}  // namespace kfstab::oracle
