#include "kfstab/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kfstab/plant_oracle.hpp"

namespace kfstab {

namespace {

constexpr int kShortlist = 20;

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

Eigen::MatrixXd default_filter(int n) {
  if (n < 1) throw DimensionError("default_filter: n must be positive");
  if (n == 3) return Eigen::Vector3d(-20.0, -36.0, -40.0).asDiagonal();
  Eigen::VectorXd diag(n);
  for (int i = 0; i < n; ++i) {
    const double frac = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    diag(i) = -20.0 * std::pow(45.0 / 20.0, frac);
  }
  return diag.asDiagonal();
}

double default_step(const Dataset& dataset) {
  if (dataset.size() < 2) throw PreconditionError("default_step: need at least two samples");
  const double spacing = dataset.times[1] - dataset.times[0];
  const double span = dataset.times.back() - dataset.times.front();
  const double target = span / 30000.0;
  const double count = std::max(1.0, std::ceil(spacing / target - 1e-9));
  return spacing / count;
}

ExcitationCheck excitation(const Eigen::MatrixXd& z_a, const Eigen::MatrixXd& u,
                           const std::vector<double>& times, double tol) {
  const auto count = static_cast<Eigen::Index>(times.size());
  if (z_a.cols() != count || u.cols() != count) {
    throw DimensionError("check_excitation: signal lengths differ from the time grid");
  }
  if (count < 2) throw PreconditionError("check_excitation: need at least two samples");
  if (!(tol > 0.0 && tol < 1.0)) throw PreconditionError("check_excitation: tol must be in (0,1)");
  Eigen::MatrixXd stacked(z_a.rows() + u.rows(), count);
  stacked << z_a, u;
  // Unit rows, then trapezoid weights divided by the sample energy.
  for (Eigen::Index i = 0; i < stacked.rows(); ++i) {
    const double norm = stacked.row(i).norm();
    if (norm > 0.0) stacked.row(i) /= norm;
  }
  for (Eigen::Index k = 0; k < count; ++k) {
    double weight = 0.0;
    if (k > 0) weight += 0.5 * (times[k] - times[k - 1]);
    if (k + 1 < count) weight += 0.5 * (times[k + 1] - times[k]);
    const double sq = stacked.col(k).squaredNorm();
    stacked.col(k) *= sq > 0.0 ? std::sqrt(weight / sq) : 0.0;
  }
  ExcitationCheck check;
  if (stacked.rows() > count) return check;
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(stacked).singularValues();
  check.max_eig = s(0) * s(0);
  check.min_eig = s(s.size() - 1) * s(s.size() - 1);
  check.excited = s(0) > 0.0 && s(s.size() - 1) > tol * s(0);
  return check;
}

bool check_excitation(const Eigen::MatrixXd& z_a, const Eigen::MatrixXd& u,
                      const std::vector<double>& times, double tol) {
  return excitation(z_a, u, times, tol).excited;
}

DataBatches build_batches(const SplitSignals& signals, const Eigen::MatrixXd& u,
                          const std::vector<double>& times, double period, int n_min,
                          double rank_tol) {
  const auto count = static_cast<Eigen::Index>(times.size());
  if (signals.z_a.cols() != count || signals.z_a_dot.cols() != count || u.cols() != count) {
    throw DimensionError("build_batches: signal lengths differ from the time grid");
  }
  if (count < 1) throw PreconditionError("build_batches: empty trajectory");
  if (!(period > 0.0)) throw PreconditionError("build_batches: period must be positive");
  const Eigen::Index l = signals.z_a.rows();
  const Eigen::Index m = u.rows();
  const Eigen::Index target = l + m;

  // Row scales from the whole record so that the rank test is unit-free.
  Eigen::MatrixXd stacked(target, count);
  stacked << signals.z_a, u;
  Eigen::VectorXd row_scale = stacked.rowwise().norm();
  for (Eigen::Index i = 0; i < target; ++i) {
    row_scale(i) = row_scale(i) > 0.0 ? 1.0 / row_scale(i) : 1.0;
  }
  const Eigen::MatrixXd normalized = row_scale.asDiagonal() * stacked;

  // Periodic instants snapped to the nearest grid point.
  std::vector<int> picked;
  std::vector<char> used(count, 0);
  const double t0 = times.front();
  const double span = times.back() - t0;
  const auto periodic = static_cast<int>(std::floor(span / period + 1e-9)) + 1;
  int cursor = 0;
  for (int k = 0; k < periodic; ++k) {
    const double t = t0 + k * period;
    while (cursor + 1 < count && std::abs(times[cursor + 1] - t) <= std::abs(times[cursor] - t)) {
      ++cursor;
    }
    if (!used[cursor]) {
      used[cursor] = 1;
      picked.push_back(cursor);
    }
  }
  const auto gather = [&](const std::vector<int>& idx) {
    Eigen::MatrixXd g(target, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) g.col(j) = normalized.col(idx[j]);
    return g;
  };

  // Pad to n_min with evenly spread unused points.
  for (Eigen::Index k = 0; static_cast<int>(picked.size()) < n_min && k < count; ++k) {
    const Eigen::Index candidate = (k * 7919) % count;
    if (!used[candidate]) {
      used[candidate] = 1;
      picked.push_back(static_cast<int>(candidate));
    }
  }

  int augmented = 0;
  while (true) {
    const Eigen::MatrixXd g = gather(picked);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeFullU);
    const Eigen::VectorXd s = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) > rank_tol * s(0)) ++rank;
    }
    if (s.size() > 0 && s(0) > 0.0 && rank == target) break;
    if (static_cast<int>(picked.size()) >= count) {
      throw ExcitationError("build_batches: rank [Z_a; U] < l + m on the full record");
    }
    // Shortlist by energy in the deficient directions, then pick the best
    // exact smallest singular value.
    const Eigen::MatrixXd weak = svd.matrixU().rightCols(target - rank);
    std::vector<std::pair<double, int>> scores;
    for (Eigen::Index k = 0; k < count; ++k) {
      if (used[k]) continue;
      const double norm = normalized.col(k).norm();
      if (!(norm > 0.0)) continue;
      scores.emplace_back((weak.transpose() * normalized.col(k)).norm() / norm,
                          static_cast<int>(k));
    }
    if (scores.empty()) {
      throw ExcitationError("build_batches: rank [Z_a; U] < l + m on the full record");
    }
    const auto keep = std::min<std::size_t>(kShortlist, scores.size());
    std::partial_sort(scores.begin(), scores.begin() + keep, scores.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    if (!(scores.front().first > rank_tol)) {
      throw ExcitationError("build_batches: no remaining sample excites the missing directions");
    }
    int best = scores.front().second;
    double best_sigma = -1.0;
    Eigen::MatrixXd trial(target, g.cols() + 1);
    trial.leftCols(g.cols()) = g;
    for (std::size_t j = 0; j < keep; ++j) {
      trial.col(g.cols()) = normalized.col(scores[j].second);
      const Eigen::VectorXd ts = Eigen::JacobiSVD<Eigen::MatrixXd>(trial).singularValues();
      const double sigma = ts(std::min<Eigen::Index>(rank, ts.size() - 1)) / ts(0);
      if (sigma > best_sigma) {
        best_sigma = sigma;
        best = scores[j].second;
      }
    }
    used[best] = 1;
    picked.push_back(best);
    ++augmented;
  }

  std::sort(picked.begin(), picked.end());
  DataBatches batches;
  const auto samples = static_cast<Eigen::Index>(picked.size());
  batches.z_a.resize(l, samples);
  batches.z_a_dot.resize(l, samples);
  batches.u.resize(m, samples);
  for (Eigen::Index j = 0; j < samples; ++j) {
    const int k = picked[j];
    batches.z_a.col(j) = signals.z_a.col(k);
    batches.z_a_dot.col(j) = signals.z_a_dot.col(k);
    batches.u.col(j) = u.col(k);
    batches.sample_times.push_back(times[k]);
  }
  batches.sample_indices = std::move(picked);
  batches.augmented = augmented;
  return batches;
}

Eigen::MatrixXd compute_gain(const Eigen::MatrixXd& q, const DataBatches& batches,
                             const Decomposition& dec) {
  const Eigen::Index l = batches.z_a.rows();
  if (q.rows() != batches.z_a.cols() || q.cols() != l) {
    throw DimensionError("compute_gain: Q must be N x l");
  }
  if (dec.l != l || dec.t_z.rows() < l) throw DimensionError("compute_gain: T_z does not match");
  const Eigen::MatrixXd zq = batches.z_a * q;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(zq.transpose());
  if (!lu.isInvertible()) throw PreconditionError("compute_gain: Z_a Q is singular");
  // K = U Q (Z_a Q)^{-1}, i.e. K^T = (Z_a Q)^{-T} (U Q)^T.
  const Eigen::MatrixXd k = lu.solve((batches.u * q).transpose()).transpose();
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(batches.u.rows(), dec.t_z.rows());
  padded.leftCols(l) = k;
  return padded * dec.t_z;
}

SynthesisResult synthesize(const Dataset& dataset, const SynthesisConfig& config) {
  RunReport report;
  report.n = config.n;
  report.m = dataset.m();
  report.p = dataset.p();
  const auto fail = [&report](const std::string& stage, const std::string& message) {
    report.stage = stage;
    report.message = message;
    return SynthesisError(stage, message, report);
  };

  FilterBank bank;
  FilteredTrajectory traj;
  try {
    dataset.validate();
    if (config.n < 1) throw DimensionError("plant order must be positive");
    const Eigen::MatrixXd f = config.f.size() == 0 ? default_filter(config.n) : config.f;
    bank = build_filter(config.n, dataset.m(), dataset.p(), f);
    report.filter_step = config.step > 0.0 ? config.step : default_step(dataset);
    traj = postprocess(dataset, bank, report.filter_step, config.hold);
  } catch (const Error& e) {
    throw fail("postprocess", e.what());
  }
  report.n_z = bank.n_z();

  Decomposition dec;
  try {
    dec = algorithm1(gram_factor(traj, config.weighting), config.rank_tol);
  } catch (const Error& e) {
    throw fail("algorithm1", e.what());
  }
  report.l = dec.l;
  report.sigma0 = to_vector(dec.sigma0);
  if (dec.l == 0) throw fail("algorithm1", "Gram matrix of the filtered data is zero");

  const SplitSignals signals = split_signals(traj, dec);
  const ExcitationCheck check =
      excitation(signals.z_a, dataset.u, traj.times, config.excitation_tol);
  report.excitation_min_eig = check.min_eig;
  report.excitation_max_eig = check.max_eig;
  if (!check.excited) {
    std::ostringstream msg;
    msg << "[z_a; u] is not interval excited (min/max eigenvalue " << check.min_eig << " / "
        << check.max_eig << ")";
    throw fail("check_excitation", msg.str());
  }

  DataBatches batches;
  try {
    batches = build_batches(signals, dataset.u, traj.times, config.period, dec.l + dataset.m(),
                            config.batch_rank_tol);
  } catch (const Error& e) {
    throw fail("build_batches", e.what());
  }
  report.samples = batches.samples();
  report.augmented_samples = batches.augmented;

  lmi::StabilizationLmi problem = lmi::make_problem(batches.z_a, batches.z_a_dot);
  if (config.lmi_epsilon > 0.0) problem.epsilon = config.lmi_epsilon;
  const Eigen::VectorXd speeds = -bank.f.diagonal();
  problem.decay_rate = config.decay_rate.value_or(kDecayFraction * speeds.minCoeff());
  problem.max_modulus = config.max_modulus.value_or(kModulusFactor * speeds.maxCoeff());
  report.epsilon = problem.epsilon;
  report.decay_rate = problem.decay_rate;
  report.max_modulus = problem.max_modulus;
  lmi::LmiResult lmi_result;
  try {
    lmi_result = lmi::solve(problem, config.lmi_options);
  } catch (const Error& e) {
    throw fail("lmi", e.what());
  }
  if (const auto* inf = std::get_if<lmi::Infeasible>(&lmi_result)) {
    std::ostringstream msg;
    msg << inf->reason << " (margin bound " << inf->margin_bound << ")";
    throw fail("lmi", msg.str());
  }
  const lmi::LmiSolution& sol = std::get<lmi::LmiSolution>(lmi_result);
  report.pd_residual = sol.pd_residual;
  report.nd_residual = sol.nd_residual;
  report.symmetry_defect = sol.symmetry_defect;

  Controller controller;
  try {
    controller.k_e = compute_gain(sol.q, batches, dec);
  } catch (const Error& e) {
    throw fail("compute_gain", e.what());
  }
  report.zaq_condition = linalg::condition_number(batches.z_a * sol.q);
  if (report.zaq_condition > 1e8) {
    report.warnings.push_back("Z_a Q is ill conditioned; the gain may be sensitive to noise");
  }
  if (batches.augmented > 0) {
    report.warnings.push_back("periodic samples were rank deficient; added " +
                              std::to_string(batches.augmented) + " samples");
  }
  controller.f = bank.f;
  controller.n = config.n;
  controller.m = dataset.m();
  controller.p = dataset.p();
  controller.validate();
  report.stage = "complete";
  return SynthesisResult{std::move(controller), std::move(dec), std::move(batches), sol,
                         std::move(report)};
}

Spectrum verify_closed_loop(const Controller& controller, const oracle::ExtendedSystem& ext) {
  controller.validate();
  if (ext.a_e.rows() != controller.n_z() || ext.b_e.cols() != controller.m) {
    throw DimensionError("verify_closed_loop: controller does not match the extended system");
  }
  return linalg::eigvals(ext.a_e + ext.b_e * controller.k_e);
}

}  // namespace kfstab
