#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kfstab/decomposition.hpp"
#include "kfstab/errors.hpp"
#include "kfstab/kfilter.hpp"
#include "kfstab/linalg.hpp"
#include "kfstab/lmi.hpp"
#include "kfstab/simulation.hpp"
#include "kfstab/system.hpp"

namespace kfstab {

namespace oracle {
struct ExtendedSystem;
}

/// Sampled batches Z_a, Zdot_a and U at instants t_1 < ... < t_N.
struct DataBatches {
  Eigen::MatrixXd z_a;      // l x N
  Eigen::MatrixXd z_a_dot;  // l x N
  Eigen::MatrixXd u;        // m x N
  std::vector<double> sample_times;
  std::vector<int> sample_indices;  // positions on the trajectory grid
  int augmented = 0;                // samples added beyond the periodic grid

  int samples() const { return static_cast<int>(sample_times.size()); }
};

struct SynthesisConfig {
  int n = 0;                  // plant order, the only structural prior
  Eigen::MatrixXd f;          // empty selects default_filter(n)
  double step = 0.0;          // filter integration step; 0 selects default_step
  InterSample hold = InterSample::cubic;
  GramWeighting weighting = GramWeighting::normalized;
  double rank_tol = linalg::kDefaultRankTol;  // on the Gram square-root factor
  double excitation_tol = 1e-8;               // interval-excitation threshold
  double period = 0.01;                       // batch sampling period
  double batch_rank_tol = linalg::kDefaultRankTol;
  double lmi_epsilon = 0.0;   // 0 selects lmi::default_epsilon
  /// Closed-loop decay margin; unset selects kDecayFraction * min |F_ii|,
  /// zero disables it.
  std::optional<double> decay_rate;
  /// Closed-loop eigenvalue modulus bound; unset selects
  /// kModulusFactor * max |F_ii|, zero disables it.
  std::optional<double> max_modulus;
  lmi::SolverOptions lmi_options;
};

/// Audit trail of one synthesis run.
struct RunReport {
  std::string stage = "complete";  // last stage reached, or the failing stage
  std::string message;
  int n = 0;
  int m = 0;
  int p = 0;
  int n_z = 0;
  int l = 0;
  int samples = 0;
  int augmented_samples = 0;
  std::vector<double> sigma0;
  double filter_step = 0.0;
  double excitation_min_eig = 0.0;
  double excitation_max_eig = 0.0;
  double epsilon = 0.0;
  double decay_rate = 0.0;
  double max_modulus = 0.0;
  double pd_residual = 0.0;
  double nd_residual = 0.0;
  double symmetry_defect = 0.0;
  double zaq_condition = 0.0;
  std::vector<std::string> warnings;
};

/// A pipeline stage failed. The partially filled report is attached.
class SynthesisError : public Error {
 public:
  SynthesisError(std::string stage, const std::string& message, RunReport report)
      : Error(stage + ": " + message), stage_(std::move(stage)), report_(std::move(report)) {}

  const std::string& stage() const { return stage_; }
  const RunReport& report() const { return report_; }

 private:
  std::string stage_;
  RunReport report_;
};

inline constexpr double kDecayFraction = 0.05;
inline constexpr double kModulusFactor = 2.5;

/// diag(-20, -36, -40) for n = 3; otherwise n values spaced log-uniformly
/// on [-45, -20] (just -20 for n = 1).
Eigen::MatrixXd default_filter(int n);

/// Largest step <= t_D / 30000 that divides the first sample interval.
double default_step(const Dataset& dataset);

struct ExcitationCheck {
  bool excited = false;
  double min_eig = 0.0;
  double max_eig = 0.0;
};

/// Interval excitation of [z_a; u]. The rows are scaled to unit norm and each
/// sample is weighted by its trapezoid weight over its squared norm. Excited
/// iff the smallest singular value of the weighted data exceeds tol times the
/// largest; min_eig and max_eig are the extreme eigenvalues of its Gram.
ExcitationCheck excitation(const Eigen::MatrixXd& z_a, const Eigen::MatrixXd& u,
                           const std::vector<double>& times, double tol);

bool check_excitation(const Eigen::MatrixXd& z_a, const Eigen::MatrixXd& u,
                      const std::vector<double>& times, double tol = 1e-8);

/// Periodic samples every `period`, extended greedily until
/// rank [Z_a; U] = l + m. Throws ExcitationError when the grid is exhausted.
DataBatches build_batches(const SplitSignals& signals, const Eigen::MatrixXd& u,
                          const std::vector<double>& times, double period, int n_min,
                          double rank_tol = linalg::kDefaultRankTol);

/// K_e = [U Q (Z_a Q)^{-1}, 0] T_z.
Eigen::MatrixXd compute_gain(const Eigen::MatrixXd& q, const DataBatches& batches,
                             const Decomposition& dec);

struct SynthesisResult {
  Controller controller;
  Decomposition decomposition;
  DataBatches batches;
  lmi::LmiSolution lmi;
  RunReport report;
};

/// Full data-driven design: filter, decompose, sample, solve, assemble.
/// Throws SynthesisError tagged with the failing stage.
SynthesisResult synthesize(const Dataset& dataset, const SynthesisConfig& config);

/// Spectrum of A_e + B_e K_e for the true extended system.
Spectrum verify_closed_loop(const Controller& controller, const oracle::ExtendedSystem& ext);

}  // namespace kfstab
