#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "kfstab/kfilter.hpp"
#include "kfstab/linalg.hpp"
#include "kfstab/system.hpp"

// Model-based objects used only to generate data and to check the data-driven
// pipeline against the true plant. Synthesis never includes this header.

namespace kfstab::oracle {

struct Minimality {
  bool controllable = false;
  bool observable = false;

  bool minimal() const { return controllable && observable; }
};

Minimality check_minimality(const ContinuousLTISystem& sys,
                            double tol = linalg::kDefaultRankTol);

/// Similarity F = T (A - L C) T^{-1} together with
/// theta = [vec(T L); vec(T B)], the parameter of the algebraic relation
/// T x(t) = M(t) theta + e^{F t} (T x0 - M0 theta).
struct Embedding {
  Eigen::MatrixXd t_mat;  // n x n, invertible
  Eigen::MatrixXd l_mat;  // n x p
  Eigen::VectorXd theta;  // (p + m) n
  Eigen::MatrixXd f;      // n x n, diagonal Hurwitz
};

inline constexpr double kMaxEmbeddingCondition = 1e8;
inline constexpr int kEmbeddingAttempts = 10;

/// Draws G (n x p) from the seed kEmbeddingAttempts times, solves
/// X A - F X = G C for each and equilibrates the rows of X. Among the draws
/// with condition number below kMaxEmbeddingCondition, the one with the
/// smallest reconstruction gain ||Pi||_F becomes T, with L = T^{-1} G.
/// Throws ObservabilityError when no draw qualifies.
Embedding luenberger_embedding(const ContinuousLTISystem& sys, const Eigen::MatrixXd& f,
                               std::uint64_t seed);

/// Canonical non-minimal realization (A_xi, B_xi, C_xi) with
/// A_xi = F_xi + L_xi C_xi and x = Pi xi.
struct NonMinimalRealization {
  Eigen::MatrixXd a_xi;
  Eigen::MatrixXd b_xi;
  Eigen::MatrixXd c_xi;
  Eigen::MatrixXd f_xi;
  Eigen::MatrixXd l_xi;
  Eigen::MatrixXd pi;  // n x n_xi, Pi = theta^T (x) T^{-1}
};

NonMinimalRealization canonical_realization(const ContinuousLTISystem& sys,
                                            const Embedding& emb);

/// Dynamics of z = (chi, vec M) compatible with the recorded data:
/// z' = A_e z + B_e u.
struct ExtendedSystem {
  Eigen::MatrixXd a_e;    // n_z x n_z
  Eigen::MatrixXd b_e;    // n_z x m
  Eigen::MatrixXd gamma;  // n x n, beta(t) = Gamma chi(t)
};

/// `x0` is the initial plant state of the experiment that produced the data.
ExtendedSystem extended_system(const ContinuousLTISystem& sys, const Embedding& emb,
                               const NonMinimalRealization& nmr, const Eigen::VectorXd& x0);

inline constexpr int kMaxSystemDraws = 100;

/// Rejection-samples standard-normal (A, B, C) until minimal.
ContinuousLTISystem random_minimal_system(int n, int m, int p, std::uint64_t seed);

/// The three-state, two-input, two-output benchmark plant with eigenvalues
/// {3.2188, 0.3906 +/- 1.5274i}.
ContinuousLTISystem example1();

}  // namespace kfstab::oracle
