#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kfstab/errors.hpp"
#include "kfstab/system.hpp"

namespace kfstab {

/// Sampled input-output record {u(t_k), y(t_k)}.
struct Dataset {
  std::vector<double> times;
  Eigen::MatrixXd u;  // m x T, column k sampled at times[k]
  Eigen::MatrixXd y;  // p x T

  int m() const { return static_cast<int>(u.rows()); }
  int p() const { return static_cast<int>(y.rows()); }
  int size() const { return static_cast<int>(times.size()); }

  /// Throws FormatError on non-increasing times, negative start or
  /// non-finite samples.
  void validate() const;
};

struct Sinusoid {
  double amplitude = 0.0;
  double omega = 0.0;  // rad/s
  double phase = 0.0;  // rad
};

/// Per-channel sum of sinusoids.
struct MultisineInput {
  std::vector<std::vector<Sinusoid>> channels;

  int m() const { return static_cast<int>(channels.size()); }
  Eigen::VectorXd operator()(double t) const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr int kSinusoidsPerChannel = 4;
inline constexpr Interval kDefaultAmplitudes{0.5, 2.0};
inline constexpr Interval kDefaultFrequencies{0.5, 20.0};

/// Draws kSinusoidsPerChannel components per channel, deterministic per seed.
MultisineInput multisine(int m, std::uint64_t seed,
                         Interval amplitudes = kDefaultAmplitudes,
                         Interval frequencies = kDefaultFrequencies);

using InputSignal = std::function<Eigen::VectorXd(double)>;

/// One classical Runge-Kutta step of x' = rhs(t, x).
template <typename Rhs>
Eigen::VectorXd rk4_step(Rhs&& rhs, const Eigen::VectorXd& state, double t, double h) {
  if (!(h > 0.0)) throw PreconditionError("rk4_step: step must be positive");
  const Eigen::VectorXd k1 = rhs(t, state);
  const Eigen::VectorXd k2 = rhs(t + 0.5 * h, state + 0.5 * h * k1);
  const Eigen::VectorXd k3 = rhs(t + 0.5 * h, state + 0.5 * h * k2);
  const Eigen::VectorXd k4 = rhs(t + h, state + h * k3);
  Eigen::VectorXd next = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw BlowUpError("rk4_step: non-finite state", t + h);
  return next;
}

/// Number of integration steps per record interval; throws unless int_dt
/// divides record_dt.
int substeps(double record_dt, double int_dt);

/// Integrates the plant from x0 and records (u, y) every record_dt on [0, t_d].
Dataset simulate_plant(const ContinuousLTISystem& sys, const Eigen::VectorXd& x0,
                       const InputSignal& input, double t_d, double record_dt,
                       double int_dt);

Dataset simulate_plant(const ContinuousLTISystem& sys, const Eigen::VectorXd& x0,
                       const MultisineInput& input, double t_d, double record_dt,
                       double int_dt);

struct ClosedLoopTrajectory {
  std::vector<double> times;
  Eigen::MatrixXd x;           // n x T
  Eigen::VectorXd x_norm;      // |x(t)|
  Eigen::VectorXd m_norm;      // ||M(t)||_F
  Eigen::MatrixXd u;           // m x T
};

/// Plant in feedback with the filter-based controller, M(0) = 0.
ClosedLoopTrajectory simulate_closed_loop(const ContinuousLTISystem& sys,
                                          const Controller& controller,
                                          const Eigen::VectorXd& x0, double t_end,
                                          double int_dt, double record_dt = 1e-2);

/// State matrix of the (x, vec M) interconnection used by simulate_closed_loop.
Eigen::MatrixXd closed_loop_matrix(const ContinuousLTISystem& sys,
                                   const Controller& controller);

}  // namespace kfstab
