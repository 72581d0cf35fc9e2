#include "kfstab/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "kfstab/errors.hpp"
#include "kfstab/linalg.hpp"

namespace kfstab::lmi {

void StabilizationLmi::validate() const {
  if (z_a.rows() < 1 || z_a.cols() < 1) throw DimensionError("lmi: Z_a must be non-empty");
  if (z_a_dot.rows() != z_a.rows() || z_a_dot.cols() != z_a.cols()) {
    throw DimensionError("lmi: Z_a and Zdot_a must have the same shape");
  }
  if (z_a.rows() > z_a.cols()) throw DimensionError("lmi: need at least l samples");
  if (!z_a.allFinite() || !z_a_dot.allFinite()) throw PreconditionError("lmi: non-finite data");
  if (!(epsilon > 0.0)) throw PreconditionError("lmi: epsilon must be positive");
  if (!(decay_rate >= 0.0) || !std::isfinite(decay_rate)) {
    throw PreconditionError("lmi: decay_rate must be finite and non-negative");
  }
  if (!(max_modulus >= 0.0) || !std::isfinite(max_modulus)) {
    throw PreconditionError("lmi: max_modulus must be finite and non-negative");
  }
  if (max_modulus > 0.0 && !(max_modulus > decay_rate)) {
    throw PreconditionError("lmi: max_modulus must exceed decay_rate");
  }
}

double default_epsilon(const Eigen::MatrixXd& z_a, const Eigen::MatrixXd& z_a_dot) {
  const auto spectral = [](const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
  };
  const double scale = std::max(spectral(z_a), spectral(z_a_dot));
  return scale > 0.0 ? 1e-6 * scale : 1e-6;
}

StabilizationLmi make_problem(Eigen::MatrixXd z_a, Eigen::MatrixXd z_a_dot) {
  StabilizationLmi problem;
  problem.epsilon = default_epsilon(z_a, z_a_dot);
  problem.z_a = std::move(z_a);
  problem.z_a_dot = std::move(z_a_dot);
  return problem;
}

namespace {

double min_eig(const Eigen::MatrixXd& sym) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

double max_eig(const Eigen::MatrixXd& sym) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

}  // namespace

LmiSolution certify(const StabilizationLmi& problem, const Eigen::MatrixXd& q) {
  if (q.rows() != problem.samples() || q.cols() != problem.l()) {
    throw DimensionError("certify: Q must be N x l");
  }
  const Eigen::MatrixXd zq = problem.z_a * q;
  const Eigen::MatrixXd zdq = problem.z_a_dot * q;
  LmiSolution s;
  s.q = q;
  s.symmetry_defect = (zq - zq.transpose()).norm();
  s.zq_norm = zq.norm();
  s.pd_residual = min_eig(0.5 * (zq + zq.transpose()));
  s.nd_residual = max_eig(zdq + zdq.transpose());
  return s;
}

bool LmiSolution::satisfies(double epsilon, double slack_tol) const {
  return pd_residual >= epsilon * (1.0 - slack_tol) &&
         nd_residual <= -epsilon * (1.0 - slack_tol) && symmetry_defect <= 1e-8 * zq_norm;
}

namespace {

// Reduced problem in the whitened coordinates:
//   find P = P^T, X (r x l) with  P > 0,  H P + P H^T + V X + X^T V^T < 0,
// solved as  max t  s.t.  P - t I >= 0,  -(...) - t I >= 0,
//                         tr P <= 1,  ||X||_F^2 <= bound,
// plus, when a modulus rho is set, the disk block
//   [rho P, -N; -N^T, rho P] - t I >= 0  with  N = H0 P + V X,
// which confines the closed-loop eigenvalues to |lambda| < rho.
class BarrierProblem {
 public:
  BarrierProblem(Eigen::MatrixXd h, Eigen::MatrixXd h_disk, Eigen::MatrixXd v, double bound,
                 double modulus)
      : h_(std::move(h)), h_disk_(std::move(h_disk)), v_(std::move(v)), bound_(bound),
        modulus_(modulus) {
    l_ = static_cast<int>(h_.rows());
    r_ = static_cast<int>(v_.cols());
    n_sym_ = l_ * (l_ + 1) / 2;
    n_vars_ = n_sym_ + r_ * l_ + 1;
    build_bases();
  }

  int vars() const { return n_vars_; }
  int t_index() const { return n_vars_ - 1; }
  double barrier_weight() const {
    double nu = 1.0 + (r_ > 0 ? 1.0 : 0.0);
    for (const Block& b : blocks_) nu += b.size;
    return nu;
  }

  Eigen::MatrixXd p_of(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd p(l_, l_);
    int k = 0;
    for (int j = 0; j < l_; ++j) {
      for (int i = j; i < l_; ++i, ++k) {
        p(i, j) = x(k);
        p(j, i) = x(k);
      }
    }
    return p;
  }

  Eigen::MatrixXd x_of(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out(r_, l_);
    for (int j = 0; j < l_; ++j) {
      for (int i = 0; i < r_; ++i) out(i, j) = x(n_sym_ + j * r_ + i);
    }
    return out;
  }

  double trace_slack(const Eigen::VectorXd& x) const { return 1.0 - p_of(x).trace(); }

  double ball_slack(const Eigen::VectorXd& x) const {
    if (r_ == 0) return 1.0;
    return bound_ - x.segment(n_sym_, r_ * l_).squaredNorm();
  }

  Eigen::MatrixXd block(int b, const Eigen::VectorXd& x) const {
    const Block& blk = blocks_[b];
    const Eigen::VectorXd flat = blk.basis * x;
    return Eigen::Map<const Eigen::MatrixXd>(flat.data(), blk.size, blk.size);
  }

  int blocks() const { return static_cast<int>(blocks_.size()); }

  /// Barrier value, or nullopt outside the strict interior.
  std::optional<double> value(const Eigen::VectorXd& x, double tau) const {
    const double g1 = trace_slack(x);
    const double g2 = ball_slack(x);
    if (!(g1 > 0.0) || !(g2 > 0.0)) return std::nullopt;
    double phi = -tau * x(t_index()) - std::log(g1) - (r_ > 0 ? std::log(g2) : 0.0);
    for (int b = 0; b < blocks(); ++b) {
      Eigen::LLT<Eigen::MatrixXd> llt(block(b, x));
      if (llt.info() != Eigen::Success) return std::nullopt;
      const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
      if ((d.array() <= 0.0).any()) return std::nullopt;
      phi -= 2.0 * d.array().log().sum();
    }
    return phi;
  }

  void derivatives(const Eigen::VectorXd& x, double tau, Eigen::VectorXd& grad,
                   Eigen::MatrixXd& hess) const {
    grad = Eigen::VectorXd::Zero(n_vars_);
    hess = Eigen::MatrixXd::Zero(n_vars_, n_vars_);
    grad(t_index()) = -tau;

    for (int b = 0; b < blocks(); ++b) {
      const Block& blk = blocks_[b];
      const int k = blk.size;
      Eigen::LLT<Eigen::MatrixXd> llt(block(b, x));
      const Eigen::MatrixXd l_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(k, k));
      // Column i of `scaled` holds vec(L^{-1} A_i L^{-T}).
      Eigen::MatrixXd scaled(k * k, n_vars_);
      for (int i = 0; i < n_vars_; ++i) {
        const Eigen::Map<const Eigen::MatrixXd> a(blk.basis.col(i).data(), k, k);
        const Eigen::MatrixXd s = l_inv * a * l_inv.transpose();
        scaled.col(i) = Eigen::Map<const Eigen::VectorXd>(s.data(), k * k);
        grad(i) -= s.trace();
      }
      hess.noalias() += scaled.transpose() * scaled;
    }

    const double g1 = trace_slack(x);
    Eigen::VectorXd trace_dir = Eigen::VectorXd::Zero(n_vars_);
    int k = 0;
    for (int j = 0; j < l_; ++j) {
      for (int i = j; i < l_; ++i, ++k) {
        if (i == j) trace_dir(k) = 1.0;
      }
    }
    grad += trace_dir / g1;
    hess += trace_dir * trace_dir.transpose() / (g1 * g1);

    if (r_ > 0) {
      const double g2 = ball_slack(x);
      const Eigen::VectorXd xs = x.segment(n_sym_, r_ * l_);
      grad.segment(n_sym_, r_ * l_) += 2.0 * xs / g2;
      hess.block(n_sym_, n_sym_, r_ * l_, r_ * l_) +=
          2.0 / g2 * Eigen::MatrixXd::Identity(r_ * l_, r_ * l_) +
          4.0 / (g2 * g2) * xs * xs.transpose();
    }
  }

  Eigen::VectorXd initial_point() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_vars_);
    int k = 0;
    for (int j = 0; j < l_; ++j) {
      for (int i = j; i < l_; ++i, ++k) {
        if (i == j) x(k) = 0.5 / l_;
      }
    }
    double lowest = std::numeric_limits<double>::infinity();
    for (int b = 0; b < blocks(); ++b) lowest = std::min(lowest, min_eig(block(b, x)));
    x(t_index()) = lowest - 1.0;
    return x;
  }

  double ball_usage(const Eigen::VectorXd& x) const {
    if (r_ == 0) return 0.0;
    return x.segment(n_sym_, r_ * l_).squaredNorm() / bound_;
  }

 private:
  struct Block {
    int size = 0;
    Eigen::MatrixXd basis;  // column i is vec of the block at unit vector e_i
  };

  Eigen::MatrixXd positivity(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd f = p_of(x);
    f.diagonal().array() -= x(t_index());
    return f;
  }

  Eigen::MatrixXd lyapunov(const Eigen::VectorXd& x) const {
    const Eigen::MatrixXd p = p_of(x);
    Eigen::MatrixXd m = h_ * p;
    if (r_ > 0) m += v_ * x_of(x);
    Eigen::MatrixXd f = -(m + m.transpose());
    f.diagonal().array() -= x(t_index());
    return f;
  }

  Eigen::MatrixXd disk(const Eigen::VectorXd& x) const {
    const Eigen::MatrixXd p = p_of(x);
    Eigen::MatrixXd n = h_disk_ * p;
    if (r_ > 0) n += v_ * x_of(x);
    Eigen::MatrixXd f(2 * l_, 2 * l_);
    f << modulus_ * p, -n, -n.transpose(), modulus_ * p;
    f.diagonal().array() -= x(t_index());
    return f;
  }

  void add_block(int size, const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& map) {
    // Every block is linear in x, so column i is the block at e_i.
    Block blk;
    blk.size = size;
    blk.basis.resize(static_cast<Eigen::Index>(size) * size, n_vars_);
    Eigen::VectorXd probe = Eigen::VectorXd::Zero(n_vars_);
    for (int i = 0; i < n_vars_; ++i) {
      probe.setZero();
      probe(i) = 1.0;
      const Eigen::MatrixXd a = map(probe);
      blk.basis.col(i) = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
    }
    blocks_.push_back(std::move(blk));
  }

  void build_bases() {
    add_block(l_, [this](const Eigen::VectorXd& x) { return positivity(x); });
    add_block(l_, [this](const Eigen::VectorXd& x) { return lyapunov(x); });
    if (modulus_ > 0.0) {
      add_block(2 * l_, [this](const Eigen::VectorXd& x) { return disk(x); });
    }
  }

  Eigen::MatrixXd h_;
  Eigen::MatrixXd h_disk_;
  Eigen::MatrixXd v_;
  double bound_;
  double modulus_;
  int l_ = 0;
  int r_ = 0;
  int n_sym_ = 0;
  int n_vars_ = 0;
  std::vector<Block> blocks_;
};

struct BarrierOutcome {
  Eigen::VectorXd x;
  double margin = 0.0;        // t at the last center
  double margin_bound = 0.0;  // certified upper bound on the optimal t
  bool feasible = false;
  bool converged = false;
  int iterations = 0;
};

BarrierOutcome run_barrier(const BarrierProblem& prob, const SolverOptions& opt) {
  BarrierOutcome out;
  Eigen::VectorXd x = prob.initial_point();
  const double nu = prob.barrier_weight();
  double tau = 1.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;

  for (int outer = 0; outer < opt.max_outer_iterations; ++outer) {
    // Centering by damped Newton.
    for (int it = 0; it < opt.max_newton_iterations; ++it) {
      ++out.iterations;
      prob.derivatives(x, tau, grad, hess);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      const Eigen::VectorXd step = -ldlt.solve(grad);
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement) || decrement < 0.0) break;
      if (0.5 * decrement <= 1e-10) break;
      const double phi = *prob.value(x, tau);
      double s = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls, s *= 0.5) {
        const Eigen::VectorXd trial = x + s * step;
        const auto trial_phi = prob.value(trial, tau);
        if (trial_phi && *trial_phi <= phi - 0.25 * s * decrement) {
          x = trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    out.x = x;
    out.margin = x(prob.t_index());
    out.margin_bound = out.margin + nu / tau;
    if (out.margin > 0.0) out.feasible = true;
    if (out.margin > 0.0 && nu / tau <= opt.relative_gap * out.margin) {
      out.converged = true;
      return out;
    }
    if (out.margin_bound <= opt.infeasibility_tol) {
      out.converged = true;
      return out;
    }
    tau *= 10.0;
  }
  return out;
}

}  // namespace

LmiResult solve(const StabilizationLmi& problem, const SolverOptions& options) {
  problem.validate();
  const int samples = problem.samples();

  // Column normalization of the sample batches; Q = D Q'.
  const double ratio = [&] {
    const double zn = problem.z_a.norm();
    const double dn = problem.z_a_dot.norm();
    return (zn > 0.0 && dn > 0.0) ? dn / zn : 1.0;
  }();
  Eigen::VectorXd d(samples);
  for (int k = 0; k < samples; ++k) {
    const double w = std::max(problem.z_a.col(k).norm(), problem.z_a_dot.col(k).norm() / ratio);
    d(k) = w > 0.0 ? 1.0 / w : 1.0;
  }
  const Eigen::MatrixXd z_scaled = problem.z_a * d.asDiagonal();
  const Eigen::MatrixXd zd_scaled = problem.z_a_dot * d.asDiagonal();

  // Row whitening S = (Z' Z'^T)^{-1/2}; Q' = Q~ S^{-1}.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> cov(z_scaled * z_scaled.transpose());
  const Eigen::VectorXd cov_eigs = cov.eigenvalues();
  if (!(cov_eigs.minCoeff() > 1e-14 * cov_eigs.maxCoeff())) {
    return Infeasible{"Z_a does not have full row rank; Z_a Q cannot be positive definite", 0.0,
                      0};
  }
  const Eigen::MatrixXd whiten =
      cov.eigenvectors() * cov_eigs.cwiseSqrt().cwiseInverse().asDiagonal() *
      cov.eigenvectors().transpose();
  const Eigen::MatrixXd unwhiten = cov.eigenvectors() * cov_eigs.cwiseSqrt().asDiagonal() *
                                   cov.eigenvectors().transpose();
  const Eigen::MatrixXd zt = whiten * z_scaled;   // Z~ Z~^T = I
  const Eigen::MatrixXd zdt = whiten * zd_scaled;

  // Q~ = Z~^T P + R_r S_r^{-1} X gives Z~ Q~ = P and Zdot~ Q~ = H P + V_r X.
  const Eigen::MatrixXd h_data = zdt * zt.transpose();
  const Eigen::MatrixXd residual = zdt - h_data * zt;  // Zdot~ (I - Z~^T Z~)
  // The decay margin shifts H: (H + a I) P + P (H + a I)^T = H P + P H^T + 2 a P.
  const Eigen::MatrixXd h =
      h_data + problem.decay_rate * Eigen::MatrixXd::Identity(h_data.rows(), h_data.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double ref = std::max(Eigen::JacobiSVD<Eigen::MatrixXd>(zdt).singularValues()(0), 1e-300);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()(i) > options.null_rank_tol * ref) ++r;
  }
  const Eigen::MatrixXd v = svd.matrixU().leftCols(r);
  const Eigen::MatrixXd lift = svd.matrixV().leftCols(r) *
                               svd.singularValues().head(r).cwiseInverse().asDiagonal();

  const double h_scale = 1.0 + Eigen::JacobiSVD<Eigen::MatrixXd>(h).singularValues()(0);
  double bound = std::pow(100.0 * h_scale, 2);
  BarrierOutcome outcome;
  int iterations = 0;
  for (int attempt = 0; attempt <= options.max_bound_enlargements; ++attempt) {
    const BarrierProblem prob(h, h_data, v, bound, problem.max_modulus);
    outcome = run_barrier(prob, options);
    iterations += outcome.iterations;
    if (outcome.feasible || prob.ball_usage(outcome.x) < 0.5) break;
    bound *= 1e4;
  }

  if (!outcome.feasible) {
    Infeasible inf;
    inf.reason = outcome.converged ? "no strictly feasible Q: margin bound <= tolerance"
                                   : "iteration budget exhausted without a feasible point";
    inf.margin_bound = outcome.margin_bound;
    inf.iterations = iterations;
    return inf;
  }

  const BarrierProblem prob(h, h_data, v, bound, problem.max_modulus);
  const Eigen::MatrixXd p = prob.p_of(outcome.x);
  Eigen::MatrixXd q_tilde = zt.transpose() * p;
  if (r > 0) q_tilde += lift * prob.x_of(outcome.x);
  Eigen::MatrixXd q = d.asDiagonal() * (q_tilde * unwhiten);

  LmiSolution sol = certify(problem, q);
  const double margin = std::min(sol.pd_residual, -sol.nd_residual);
  if (!(margin > 0.0)) {
    return Infeasible{"reduced solution failed certification on the original data", margin,
                      iterations};
  }
  if (margin < problem.epsilon) {
    q *= problem.epsilon / margin;
    sol = certify(problem, q);
  }
  if (!sol.satisfies(problem.epsilon, options.slack_tol)) {
    return Infeasible{"solution violates the residual contract after rescaling",
                      std::min(sol.pd_residual, -sol.nd_residual), iterations};
  }
  return sol;
}

}  // namespace kfstab::lmi
