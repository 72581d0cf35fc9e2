#include "kfstab/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kfstab/errors.hpp"
#include "kfstab/plant_oracle.hpp"

namespace kfstab {

namespace {

Eigen::VectorXd sample_weights(const FilteredTrajectory& traj, GramWeighting weighting) {
  const int count = traj.size();
  if (count < 2) throw PreconditionError("gram_matrix: need at least two samples");
  if (traj.z.cols() != count) throw DimensionError("gram_matrix: z does not match the time grid");
  Eigen::VectorXd w(count);
  for (int k = 0; k < count; ++k) {
    double weight = 0.0;
    if (k > 0) weight += 0.5 * (traj.times[k] - traj.times[k - 1]);
    if (k + 1 < count) weight += 0.5 * (traj.times[k + 1] - traj.times[k]);
    if (weighting == GramWeighting::normalized) {
      const double sq = traj.z.col(k).squaredNorm();
      weight = sq > 0.0 ? weight / sq : 0.0;
    }
    w(k) = weight;
  }
  return w;
}

}  // namespace

Eigen::MatrixXd gram_matrix(const FilteredTrajectory& traj, GramWeighting weighting) {
  const Eigen::VectorXd w = sample_weights(traj, weighting);
  const int n_z = traj.n_z();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_z, n_z);
  for (int k = 0; k < traj.size(); ++k) {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(traj.z.col(k), w(k));
  }
  Eigen::MatrixXd full = gram.selfadjointView<Eigen::Lower>();
  return 0.5 * (full + full.transpose());
}

Decomposition algorithm1(const Eigen::MatrixXd& gram, double rel_tol) {
  linalg::require_square(gram, "algorithm1");
  const RankedSvd svd = linalg::svd_rank(gram, rel_tol);
  Decomposition dec;
  dec.gram = gram;
  dec.l = svd.rank;
  dec.t_z = svd.u.transpose();
  dec.sigma0 = svd.singular_values.head(svd.rank);
  return dec;
}

GramFactor gram_factor(const FilteredTrajectory& traj, GramWeighting weighting) {
  const Eigen::VectorXd w = sample_weights(traj, weighting);
  const int n_z = traj.n_z();
  // Rows of `data` are sqrt(w_k) z_k^T, so data^T data is the Gram matrix.
  const Eigen::MatrixXd data = w.cwiseSqrt().asDiagonal() * traj.z.transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(data);
  GramFactor factor;
  factor.r = Eigen::MatrixXd::Zero(n_z, n_z);
  const Eigen::Index rows = std::min<Eigen::Index>(n_z, data.rows());
  factor.r.topRows(rows) =
      qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>().toDenseMatrix();
  return factor;
}

Decomposition algorithm1(const GramFactor& factor, double rel_tol) {
  linalg::require_square(factor.r, "algorithm1");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) {
    throw PreconditionError("algorithm1: rel_tol must be in (0, 1)");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(factor.r, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  int l = 0;
  if (s.size() > 0 && s(0) > 0.0) {
    while (l < s.size() && s(l) > rel_tol * s(0)) ++l;
  }
  Decomposition dec;
  dec.gram = factor.r.transpose() * factor.r;
  dec.l = l;
  dec.t_z = svd.matrixV().transpose();
  dec.sigma0 = s.head(l).cwiseAbs2();
  return dec;
}

SplitSignals split_signals(const FilteredTrajectory& traj, const Decomposition& dec) {
  if (dec.l == 0) throw ExcitationError("split_signals: Gram matrix has rank zero");
  if (dec.t_z.cols() != traj.n_z()) throw DimensionError("split_signals: T_z does not match z");
  const Eigen::MatrixXd t_a = dec.t_a();
  return SplitSignals{t_a * traj.z, t_a * traj.z_dot};
}

DecompositionReport verify_decomposition(const oracle::ExtendedSystem& ext,
                                         const Decomposition& dec, double tol) {
  const Eigen::Index n_z = ext.a_e.rows();
  if (dec.t_z.rows() != n_z) throw DimensionError("verify_decomposition: size mismatch");
  const int l = dec.l;
  const Eigen::Index nb = n_z - l;

  const Eigen::MatrixXd a_t = dec.t_z * ext.a_e * dec.t_z.transpose();
  const Eigen::MatrixXd b_t = dec.t_z * ext.b_e;

  DecompositionReport report;
  report.a_e_norm = ext.a_e.norm();
  if (nb > 0) {
    report.a_ba_norm = a_t.bottomLeftCorner(nb, l).norm();
    report.b_b_norm = b_t.bottomRows(nb).norm();
    report.a_b_abscissa = linalg::spectral_abscissa(a_t.bottomRightCorner(nb, nb));
  } else {
    report.a_b_abscissa = -std::numeric_limits<double>::infinity();
  }
  const Eigen::MatrixXd reach = linalg::reachable_subspace(ext.a_e, ext.b_e, tol);
  report.reachable_angle = linalg::max_principal_angle(reach, dec.t_a().transpose());
  return report;
}

}  // namespace kfstab
