#include "kfstab/kfilter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kfstab/errors.hpp"
#include "kfstab/linalg.hpp"

namespace kfstab {

void require_filter_matrix(const Eigen::MatrixXd& f) {
  linalg::require_square(f, "filter matrix");
  const Eigen::Index n = f.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && f(i, j) != 0.0) {
        throw PreconditionError("filter matrix must be diagonal");
      }
    }
    if (!(f(i, i) < 0.0) || !std::isfinite(f(i, i))) {
      throw PreconditionError("filter eigenvalues must be finite and negative");
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      if (f(i, i) == f(j, j)) throw PreconditionError("filter eigenvalues must be distinct");
    }
  }
}

FilterBank build_filter(int n, int m, int p, const Eigen::MatrixXd& f) {
  if (n < 1 || m < 1 || p < 1) throw DimensionError("build_filter: n, m, p must be positive");
  if (f.rows() != n || f.cols() != n) throw DimensionError("build_filter: F must be n x n");
  require_filter_matrix(f);

  FilterBank bank;
  bank.f = f;
  bank.n = n;
  bank.m = m;
  bank.p = p;
  bank.mu = (p + m) * n;
  bank.n_xi = n * bank.mu;

  const Eigen::MatrixXd identity_n = Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd vec_identity = linalg::vec(identity_n);
  bank.f_xi = linalg::kron(Eigen::MatrixXd::Identity(bank.mu, bank.mu), f);

  const int block = n * n;
  bank.b_xi = Eigen::MatrixXd::Zero(bank.n_xi, m);
  bank.b_xi.bottomRows(m * block) = linalg::kron(Eigen::MatrixXd::Identity(m, m), vec_identity);
  bank.l_xi = Eigen::MatrixXd::Zero(bank.n_xi, p);
  bank.l_xi.topRows(p * block) = linalg::kron(Eigen::MatrixXd::Identity(p, p), vec_identity);
  return bank;
}

namespace {

void check_signals(const FilterBank& bank, const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  if (u.size() != bank.m) throw DimensionError("filter: u has wrong length");
  if (y.size() != bank.p) throw DimensionError("filter: y has wrong length");
}

}  // namespace

Eigen::MatrixXd filter_rhs(const FilterBank& bank, const Eigen::MatrixXd& m_state,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  if (m_state.rows() != bank.n || m_state.cols() != bank.mu) {
    throw DimensionError("filter_rhs: M must be n x (p + m) n");
  }
  check_signals(bank, u, y);
  Eigen::MatrixXd out = bank.f * m_state;
  const int n = bank.n;
  for (int j = 0; j < bank.p; ++j) {
    out.middleCols(j * n, n).diagonal().array() += y(j);
  }
  for (int j = 0; j < bank.m; ++j) {
    out.middleCols((bank.p + j) * n, n).diagonal().array() += u(j);
  }
  return out;
}

Eigen::VectorXd filter_rhs_vectorized(const FilterBank& bank, const Eigen::VectorXd& vec_m,
                                      const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  if (vec_m.size() != bank.n_xi) throw DimensionError("filter_rhs_vectorized: wrong state length");
  check_signals(bank, u, y);
  return bank.f_xi * vec_m + bank.b_xi * u + bank.l_xi * y;
}

Eigen::VectorXd chi_rhs(const Eigen::MatrixXd& lambda, const Eigen::VectorXd& chi) {
  if (lambda.rows() != lambda.cols() || lambda.rows() != chi.size()) {
    throw DimensionError("chi_rhs: Lambda must be square and match chi");
  }
  return lambda * chi;
}

namespace {

/// Evaluates the sampled columns of `samples` at time t.
class SampleReconstruction {
 public:
  SampleReconstruction(const std::vector<double>& times, const Eigen::MatrixXd& samples,
                       InterSample hold)
      : times_(times), samples_(samples), hold_(hold) {}

  /// `k` is the index of the sample interval [t_k, t_{k+1}] containing t.
  Eigen::VectorXd operator()(int k, double t) const {
    const int count = static_cast<int>(times_.size());
    if (hold_ == InterSample::zero_order_hold || count == 1) {
      return samples_.col(k);
    }
    const int points = std::min(4, count);
    const int first = std::clamp(k - 1, 0, count - points);
    Eigen::VectorXd value = Eigen::VectorXd::Zero(samples_.rows());
    for (int i = first; i < first + points; ++i) {
      double weight = 1.0;
      for (int j = first; j < first + points; ++j) {
        if (j != i) weight *= (t - times_[j]) / (times_[i] - times_[j]);
      }
      value += weight * samples_.col(i);
    }
    return value;
  }

 private:
  const std::vector<double>& times_;
  const Eigen::MatrixXd& samples_;
  InterSample hold_;
};

}  // namespace

FilteredTrajectory postprocess(const Dataset& dataset, const FilterBank& bank, double step,
                               InterSample hold) {
  dataset.validate();
  if (dataset.size() == 0) throw PreconditionError("postprocess: empty dataset");
  if (!(step > 0.0)) throw PreconditionError("postprocess: step must be positive");
  if (dataset.m() != bank.m || dataset.p() != bank.p) {
    throw DimensionError("postprocess: dataset channels do not match the filter");
  }

  const int n = bank.n;
  const int n_xi = bank.n_xi;
  const int count = dataset.size();
  const Eigen::VectorXd lambda = bank.f.diagonal();
  const Eigen::VectorXd f_xi_diag = bank.f_xi.diagonal();
  const int block = n * n;

  // F_xi is diagonal and B_xi, L_xi only touch the vec(I_n) positions, so
  // the right-hand side is assembled without dense products.
  const auto rhs_of = [&](const Eigen::VectorXd& z, const Eigen::VectorXd& u,
                          const Eigen::VectorXd& y) {
    Eigen::VectorXd dz(n + n_xi);
    dz.head(n) = lambda.cwiseProduct(z.head(n));
    dz.tail(n_xi) = f_xi_diag.cwiseProduct(z.tail(n_xi));
    for (int j = 0; j < bank.p; ++j) {
      for (int i = 0; i < n; ++i) dz(n + j * block + i * n + i) += y(j);
    }
    for (int j = 0; j < bank.m; ++j) {
      for (int i = 0; i < n; ++i) dz(n + (bank.p + j) * block + i * n + i) += u(j);
    }
    return dz;
  };

  const SampleReconstruction u_at(dataset.times, dataset.u, hold);
  const SampleReconstruction y_at(dataset.times, dataset.y, hold);

  FilteredTrajectory traj;
  traj.n = n;
  traj.times = dataset.times;
  traj.z.resize(n + n_xi, count);
  traj.z_dot.resize(n + n_xi, count);

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n + n_xi);
  z.head(n).setOnes();
  for (int k = 0; k < count; ++k) {
    traj.z.col(k) = z;
    traj.z_dot.col(k) = rhs_of(z, dataset.u.col(k), dataset.y.col(k));
    if (k + 1 == count) break;
    const double t0 = dataset.times[k];
    const int steps = substeps(dataset.times[k + 1] - t0, step);
    const double h = (dataset.times[k + 1] - t0) / steps;
    const auto rhs = [&](double t, const Eigen::VectorXd& state) {
      return rhs_of(state, u_at(k, t), y_at(k, t));
    };
    for (int s = 0; s < steps; ++s) z = rk4_step(rhs, z, t0 + s * h, h);
  }
  return traj;
}

}  // namespace kfstab
