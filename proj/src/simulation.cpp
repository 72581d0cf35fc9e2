#include "kfstab/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "kfstab/kfilter.hpp"

namespace kfstab {

void ContinuousLTISystem::validate() const {
  if (a.rows() < 1 || a.rows() != a.cols()) {
    throw DimensionError("system: A must be square and non-empty");
  }
  if (b.rows() != a.rows() || b.cols() < 1) {
    throw DimensionError("system: B must have n rows and at least one column");
  }
  if (c.cols() != a.rows() || c.rows() < 1) {
    throw DimensionError("system: C must have n columns and at least one row");
  }
  if (!a.allFinite() || !b.allFinite() || !c.allFinite()) {
    throw DimensionError("system: matrices must be finite");
  }
}

void Controller::validate() const {
  if (n < 1 || m < 1 || p < 1) throw DimensionError("controller: dimensions must be positive");
  if (f.rows() != n || f.cols() != n) throw DimensionError("controller: F must be n x n");
  if (k_e.rows() != m || k_e.cols() != n_z()) {
    throw DimensionError("controller: K_e must be m x (n + n^2 (p + m)), expected " +
                         std::to_string(m) + "x" + std::to_string(n_z()));
  }
}

void Dataset::validate() const {
  const auto count = static_cast<Eigen::Index>(times.size());
  if (u.cols() != count || y.cols() != count) {
    throw FormatError("dataset: sample count mismatch between t, u and y");
  }
  if (!times.empty() && !(times.front() >= 0.0)) {
    throw FormatError("dataset: first time must be non-negative");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw FormatError("dataset: times must be strictly increasing");
  }
  if (!u.allFinite() || !y.allFinite()) throw FormatError("dataset: non-finite sample");
}

Eigen::VectorXd MultisineInput::operator()(double t) const {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m());
  for (int i = 0; i < m(); ++i) {
    for (const Sinusoid& s : channels[i]) {
      u(i) += s.amplitude * std::sin(s.omega * t + s.phase);
    }
  }
  return u;
}

MultisineInput multisine(int m, std::uint64_t seed, Interval amplitudes,
                         Interval frequencies) {
  if (m < 1) throw PreconditionError("multisine: need at least one channel");
  if (amplitudes.lo < 0.0 || amplitudes.hi < amplitudes.lo || frequencies.lo <= 0.0 ||
      frequencies.hi <= frequencies.lo) {
    throw PreconditionError("multisine: invalid amplitude or frequency range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(amplitudes.lo, amplitudes.hi);
  std::uniform_real_distribution<double> freq(frequencies.lo, frequencies.hi);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double min_gap = 1e-6 * (frequencies.hi - frequencies.lo);

  MultisineInput input;
  input.channels.resize(m);
  for (auto& channel : input.channels) {
    while (static_cast<int>(channel.size()) < kSinusoidsPerChannel) {
      Sinusoid s{amp(rng), freq(rng), phase(rng)};
      const bool distinct = std::none_of(channel.begin(), channel.end(), [&](const Sinusoid& o) {
        return std::abs(o.omega - s.omega) <= min_gap;
      });
      if (distinct) channel.push_back(s);
    }
  }
  return input;
}

int substeps(double record_dt, double int_dt) {
  if (!(record_dt > 0.0) || !(int_dt > 0.0)) {
    throw PreconditionError("time steps must be positive");
  }
  const double ratio = record_dt / int_dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw PreconditionError("integration step must divide the record step");
  }
  return static_cast<int>(rounded);
}

namespace {

int record_count(double t_end, double record_dt) {
  const double intervals = t_end / record_dt;
  const double rounded = std::round(intervals);
  if (std::abs(intervals - rounded) > 1e-9 * std::max(1.0, intervals)) {
    throw PreconditionError("horizon must be a multiple of the record step");
  }
  return static_cast<int>(rounded) + 1;
}

}  // namespace

Dataset simulate_plant(const ContinuousLTISystem& sys, const Eigen::VectorXd& x0,
                       const InputSignal& input, double t_d, double record_dt,
                       double int_dt) {
  sys.validate();
  if (!(t_d > 0.0)) throw PreconditionError("simulate_plant: t_d must be positive");
  if (x0.size() != sys.n()) throw DimensionError("simulate_plant: x0 has wrong length");
  const int steps = substeps(record_dt, int_dt);
  const int samples = record_count(t_d, record_dt);

  const auto rhs = [&](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return sys.a * x + sys.b * input(t);
  };

  Dataset data;
  data.times.resize(samples);
  data.u.resize(sys.m(), samples);
  data.y.resize(sys.p(), samples);
  Eigen::VectorXd x = x0;
  for (int k = 0; k < samples; ++k) {
    const double t = k * record_dt;
    data.times[k] = t;
    const Eigen::VectorXd u = input(t);
    if (u.size() != sys.m()) throw DimensionError("simulate_plant: input has wrong length");
    data.u.col(k) = u;
    data.y.col(k) = sys.c * x;
    if (k + 1 == samples) break;
    for (int s = 0; s < steps; ++s) x = rk4_step(rhs, x, t + s * int_dt, int_dt);
  }
  return data;
}

Dataset simulate_plant(const ContinuousLTISystem& sys, const Eigen::VectorXd& x0,
                       const MultisineInput& input, double t_d, double record_dt,
                       double int_dt) {
  if (input.m() != sys.m()) throw DimensionError("simulate_plant: input channel count != m");
  return simulate_plant(sys, x0, InputSignal([&input](double t) { return input(t); }), t_d,
                        record_dt, int_dt);
}

Eigen::MatrixXd closed_loop_matrix(const ContinuousLTISystem& sys,
                                   const Controller& controller) {
  sys.validate();
  controller.validate();
  if (controller.n != sys.n() || controller.m != sys.m() || controller.p != sys.p()) {
    throw DimensionError("closed loop: controller dimensions do not match the plant");
  }
  const FilterBank bank = build_filter(sys.n(), sys.m(), sys.p(), controller.f);
  const int n = sys.n();
  const int n_xi = bank.n_xi;
  const Eigen::MatrixXd k_xi = controller.k_e.rightCols(n_xi);

  Eigen::MatrixXd a_cl(n + n_xi, n + n_xi);
  a_cl.topLeftCorner(n, n) = sys.a;
  a_cl.topRightCorner(n, n_xi) = sys.b * k_xi;
  a_cl.bottomLeftCorner(n_xi, n) = bank.l_xi * sys.c;
  a_cl.bottomRightCorner(n_xi, n_xi) = bank.f_xi + bank.b_xi * k_xi;
  return a_cl;
}

ClosedLoopTrajectory simulate_closed_loop(const ContinuousLTISystem& sys,
                                          const Controller& controller,
                                          const Eigen::VectorXd& x0, double t_end,
                                          double int_dt, double record_dt) {
  if (!(t_end > 0.0)) throw PreconditionError("simulate_closed_loop: t_end must be positive");
  if (x0.size() != sys.n()) throw DimensionError("simulate_closed_loop: x0 has wrong length");
  const Eigen::MatrixXd a_cl = closed_loop_matrix(sys, controller);
  const int n = sys.n();
  const int n_xi = controller.n_xi();
  const int steps = substeps(record_dt, int_dt);
  const int samples = record_count(t_end, record_dt);

  const auto rhs = [&a_cl](double, const Eigen::VectorXd& s) -> Eigen::VectorXd {
    return a_cl * s;
  };

  ClosedLoopTrajectory out;
  out.times.resize(samples);
  out.x.resize(n, samples);
  out.x_norm.resize(samples);
  out.m_norm.resize(samples);
  out.u.resize(sys.m(), samples);

  Eigen::VectorXd state = Eigen::VectorXd::Zero(n + n_xi);
  state.head(n) = x0;
  for (int k = 0; k < samples; ++k) {
    const double t = k * record_dt;
    out.times[k] = t;
    out.x.col(k) = state.head(n);
    out.x_norm(k) = state.head(n).norm();
    out.m_norm(k) = state.tail(n_xi).norm();  // Frobenius norm of M
    out.u.col(k) = controller.control(state.tail(n_xi));
    if (k + 1 == samples) break;
    for (int s = 0; s < steps; ++s) state = rk4_step(rhs, state, t + s * int_dt, int_dt);
  }
  return out;
}

}  // namespace kfstab
