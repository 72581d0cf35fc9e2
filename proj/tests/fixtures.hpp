#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "kfstab/plant_oracle.hpp"
#include "kfstab/simulation.hpp"
#include "kfstab/synthesis.hpp"

namespace kfstab::testing {

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

inline Eigen::MatrixXd diag(std::initializer_list<double> entries) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(entries.size()));
  Eigen::Index i = 0;
  for (double e : entries) d(i++) = e;
  return d.asDiagonal();
}

inline Eigen::Vector3d example1_x0() { return {-1.0, 1.0, 2.0}; }

/// The benchmark experiment: t_D = 3 s, 1 ms records, 0.1 ms integration,
/// F = diag(-20, -36, -40), batches every 10 ms.
struct Example1Run {
  ContinuousLTISystem sys;
  Eigen::VectorXd x0;
  Dataset data;
  SynthesisResult result;
  oracle::ExtendedSystem ext;
};

inline Example1Run run_example1(std::uint64_t input_seed = 1) {
  Example1Run run;
  run.sys = oracle::example1();
  run.x0 = example1_x0();
  run.data = simulate_plant(run.sys, run.x0, multisine(2, input_seed), 3.0, 1e-3, 1e-4);
  SynthesisConfig config;
  config.n = 3;
  config.f = diag({-20.0, -36.0, -40.0});
  run.result = synthesize(run.data, config);
  const oracle::Embedding emb = oracle::luenberger_embedding(run.sys, config.f, 11);
  const oracle::NonMinimalRealization nmr = oracle::canonical_realization(run.sys, emb);
  run.ext = oracle::extended_system(run.sys, emb, nmr, run.x0);
  return run;
}

/// Shared across the tests of one binary; the pipeline takes about a second.
inline const Example1Run& example1_run() {
  static const Example1Run run = run_example1();
  return run;
}

}  // namespace kfstab::testing
