#include "kfstab/lmi.hpp"

#include <random>
#include <variant>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kfstab/errors.hpp"
#include "kfstab/linalg.hpp"

namespace kfstab::lmi {
namespace {

using testing::random_matrix;

StabilizationLmi scalar_feasible() {
  Eigen::MatrixXd z(1, 2);
  Eigen::MatrixXd zd(1, 2);
  z << 1, 1;
  zd << 1, -2;
  return make_problem(z, zd);
}

StabilizationLmi scalar_contradictory() {
  return make_problem(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
}

LmiSolution expect_solution(const LmiResult& result) {
  if (const auto* inf = std::get_if<Infeasible>(&result)) {
    ADD_FAILURE() << "unexpected infeasibility: " << inf->reason;
  }
  return std::get<LmiSolution>(result);
}

TEST(CertifyTest, HandPickedQ) {
  const LmiSolution s = certify(scalar_feasible(), Eigen::Vector2d(0, 1));
  EXPECT_DOUBLE_EQ(s.pd_residual, 1.0);
  EXPECT_DOUBLE_EQ(s.nd_residual, -4.0);
  EXPECT_DOUBLE_EQ(s.symmetry_defect, 0.0);
  EXPECT_TRUE(s.satisfies(scalar_feasible().epsilon, 1e-3));
}

TEST(CertifyTest, ZeroQFailsMargin) {
  const StabilizationLmi problem = scalar_feasible();
  const LmiSolution s = certify(problem, Eigen::Vector2d::Zero());
  EXPECT_EQ(s.pd_residual, 0.0);
  EXPECT_FALSE(s.satisfies(problem.epsilon, 1e-3));
}

TEST(CertifyTest, ContradictoryInstanceRejectsAnyQ) {
  const StabilizationLmi problem = scalar_contradictory();
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    const LmiSolution s = certify(problem, random_matrix(1, 1, rng));
    EXPECT_FALSE(s.satisfies(problem.epsilon, 1e-3));
  }
}

TEST(CertifyTest, WrongShapeThrows) {
  EXPECT_THROW(certify(scalar_feasible(), Eigen::Vector3d::Zero()), DimensionError);
}

TEST(SolveTest, ScalarFeasible) {
  const StabilizationLmi problem = scalar_feasible();
  const LmiSolution s = expect_solution(solve(problem));
  const LmiSolution again = certify(problem, s.q);
  EXPECT_TRUE(again.satisfies(problem.epsilon, SolverOptions{}.slack_tol));
  EXPECT_DOUBLE_EQ(again.pd_residual, s.pd_residual);
}

TEST(SolveTest, ScalarContradictory) {
  const LmiResult result = solve(scalar_contradictory());
  ASSERT_TRUE(std::holds_alternative<Infeasible>(result));
  EXPECT_FALSE(std::get<Infeasible>(result).reason.empty());
}

TEST(SolveTest, Deterministic) {
  const StabilizationLmi problem = scalar_feasible();
  const LmiSolution a = expect_solution(solve(problem));
  const LmiSolution b = expect_solution(solve(problem));
  EXPECT_EQ(a.q, b.q);
}

TEST(SolveTest, ScalingQPreservesContractAndClosedLoop) {
  const StabilizationLmi problem = scalar_feasible();
  const Eigen::MatrixXd q = expect_solution(solve(problem)).q;
  const LmiSolution doubled = certify(problem, 2.0 * q);
  EXPECT_TRUE(doubled.satisfies(problem.epsilon, 1e-3));
  const Eigen::MatrixXd closed = problem.z_a_dot * q * (problem.z_a * q).inverse();
  const Eigen::MatrixXd closed2 =
      problem.z_a_dot * (2.0 * q) * (problem.z_a * (2.0 * q)).inverse();
  EXPECT_NEAR(closed(0, 0), closed2(0, 0), 1e-12);
}

/// Data from z' = A z + B u with (A, B) controllable and random samples.
struct LinearData {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::MatrixXd z;
  Eigen::MatrixXd z_dot;
  Eigen::MatrixXd u;
};

LinearData linear_data(int l, int m, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LinearData d;
  d.a = random_matrix(l, l, rng) + 2.0 * Eigen::MatrixXd::Identity(l, l);
  d.b = random_matrix(l, m, rng);
  d.z = random_matrix(l, samples, rng);
  d.u = random_matrix(m, samples, rng);
  d.z_dot = d.a * d.z + d.b * d.u;
  return d;
}

TEST(SolveTest, RandomStabilizableDataGiveHurwitzLoops) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearData d = linear_data(4, 2, 12, seed);
    const StabilizationLmi problem = make_problem(d.z, d.z_dot);
    const LmiSolution s = expect_solution(solve(problem));
    EXPECT_TRUE(certify(problem, s.q).satisfies(problem.epsilon, 1e-3));
    const Eigen::MatrixXd zq_inv = (d.z * s.q).inverse();
    const Eigen::MatrixXd k = d.u * s.q * zq_inv;
    // Data consistency: A + B K equals Zdot Q (Z Q)^{-1}.
    EXPECT_LE((d.a + d.b * k - d.z_dot * s.q * zq_inv).norm(), 1e-8 * (1.0 + k.norm()));
    EXPECT_TRUE(linalg::is_hurwitz(d.a + d.b * k)) << "seed " << seed;
  }
}

TEST(SolveTest, RegionConstraintsPlaceEigenvalues) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LinearData d = linear_data(3, 1, 10, 100 + seed);
    StabilizationLmi problem = make_problem(d.z, d.z_dot);
    problem.decay_rate = 0.5;
    problem.max_modulus = 30.0;
    const LmiSolution s = expect_solution(solve(problem));
    const Eigen::MatrixXd k = d.u * s.q * (d.z * s.q).inverse();
    for (const auto& e : linalg::eigvals(d.a + d.b * k).eigenvalues) {
      EXPECT_LT(e.real(), -0.5);
      EXPECT_LT(std::abs(e), 30.0);
    }
  }
}

TEST(SolveTest, UncontrollableUnstableModeIsInfeasible) {
  // Second coordinate obeys z2' = z2 whatever the input.
  Eigen::MatrixXd z(2, 6);
  z << 1, -1, 2, 0.5, -0.3, 1.2,
       1, 2, -1, 0.7, 0.4, -0.9;
  const Eigen::RowVectorXd u = Eigen::RowVectorXd::LinSpaced(6, -1.0, 2.0);
  Eigen::MatrixXd zd(2, 6);
  zd.row(0) = -z.row(0) + u;
  zd.row(1) = z.row(1);
  EXPECT_TRUE(std::holds_alternative<Infeasible>(solve(make_problem(z, zd))));
}

TEST(ProblemTest, DefaultEpsilonScalesWithData) {
  const StabilizationLmi problem = scalar_feasible();
  EXPECT_NEAR(problem.epsilon, 1e-6 * std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(default_epsilon(Eigen::MatrixXd::Identity(2, 2), 3.0 * Eigen::MatrixXd::Identity(2, 2)),
              3e-6, 1e-18);
}

TEST(ProblemTest, ValidationErrors) {
  StabilizationLmi p = scalar_feasible();
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), PreconditionError);
  p = scalar_feasible();
  p.z_a_dot = Eigen::MatrixXd::Ones(1, 3);
  EXPECT_THROW(p.validate(), DimensionError);
  p = scalar_feasible();
  p.z_a = Eigen::MatrixXd::Ones(3, 2);
  p.z_a_dot = Eigen::MatrixXd::Ones(3, 2);
  EXPECT_THROW(p.validate(), DimensionError);
  p = scalar_feasible();
  p.decay_rate = -1.0;
  EXPECT_THROW(p.validate(), PreconditionError);
  p = scalar_feasible();
  p.decay_rate = 2.0;
  p.max_modulus = 1.0;
  EXPECT_THROW(p.validate(), PreconditionError);
  p = scalar_feasible();
  p.z_a(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(p.validate(), PreconditionError);
  EXPECT_THROW(solve(p), PreconditionError);
}

}  // namespace
}  // namespace kfstab::lmi
