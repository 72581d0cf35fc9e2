#include "kfstab/plant_oracle.hpp"

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kfstab/errors.hpp"
#include "kfstab/kfilter.hpp"

namespace kfstab::oracle {
namespace {

using testing::diag;

TEST(MinimalityTest, Cases) {
  EXPECT_TRUE(check_minimality(example1()).minimal());

  const ContinuousLTISystem uncontrollable{diag({1, 2}), Eigen::Vector2d(1, 0),
                                           Eigen::MatrixXd::Identity(2, 2)};
  const Minimality a = check_minimality(uncontrollable);
  EXPECT_FALSE(a.controllable);
  EXPECT_TRUE(a.observable);

  Eigen::MatrixXd c(1, 2);
  c << 1, 0;
  const ContinuousLTISystem unobservable{diag({1, 2}), Eigen::MatrixXd::Identity(2, 2), c};
  const Minimality b = check_minimality(unobservable);
  EXPECT_TRUE(b.controllable);
  EXPECT_FALSE(b.observable);
}

TEST(EmbeddingTest, Example1Spectrum) {
  const ContinuousLTISystem sys = example1();
  const Eigen::MatrixXd f = diag({-20, -36, -45});
  const Embedding emb = luenberger_embedding(sys, f, 3);
  std::vector<double> re;
  for (const auto& e : linalg::eigvals(sys.a - emb.l_mat * sys.c).eigenvalues) {
    EXPECT_NEAR(e.imag(), 0.0, 1e-6);
    re.push_back(e.real());
  }
  std::sort(re.begin(), re.end());
  EXPECT_NEAR(re[0], -45.0, 1e-6);
  EXPECT_NEAR(re[1], -36.0, 1e-6);
  EXPECT_NEAR(re[2], -20.0, 1e-6);
  EXPECT_EQ(emb.theta.size(), 12);
}

TEST(EmbeddingTest, ScalarGainIndependentOfDraw) {
  const ContinuousLTISystem sys{Eigen::MatrixXd::Constant(1, 1, 1.0),
                                Eigen::MatrixXd::Constant(1, 1, 1.0),
                                Eigen::MatrixXd::Constant(1, 1, 1.0)};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Embedding emb = luenberger_embedding(sys, diag({-2.0}), seed);
    EXPECT_NEAR(emb.l_mat(0, 0), 3.0, 1e-12);
  }
}

TEST(EmbeddingTest, SimilarityResidualOnRandomSystems) {
  const Eigen::MatrixXd f = diag({-20, -36, -45});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ContinuousLTISystem sys = random_minimal_system(3, 2, 2, seed);
    const Embedding emb = luenberger_embedding(sys, f, seed + 100);
    const Eigen::MatrixXd similar =
        emb.t_mat * (sys.a - emb.l_mat * sys.c) * emb.t_mat.inverse();
    EXPECT_LE((similar - f).norm(), 1e-8) << "seed " << seed;
  }
}

TEST(EmbeddingTest, ErrorPaths) {
  const ContinuousLTISystem sys = example1();
  EXPECT_THROW(luenberger_embedding(sys, diag({-1, -2}), 0), DimensionError);
  EXPECT_THROW(luenberger_embedding(sys, diag({-1, -1, -2}), 0), PreconditionError);
  const ContinuousLTISystem stable{diag({-1, -3}), Eigen::Vector2d(1, 1),
                                   Eigen::RowVector2d(1, 1)};
  EXPECT_THROW(luenberger_embedding(stable, diag({-1, -2}), 0), PreconditionError);
}

TEST(CanonicalRealizationTest, MinimalDimensions) {
  const ContinuousLTISystem sys{Eigen::MatrixXd::Constant(1, 1, 1.0),
                                Eigen::MatrixXd::Constant(1, 1, 1.0),
                                Eigen::MatrixXd::Constant(1, 1, 1.0)};
  const NonMinimalRealization nmr =
      canonical_realization(sys, luenberger_embedding(sys, diag({-2.0}), 0));
  EXPECT_EQ(nmr.f_xi, diag({-2.0, -2.0}));
  EXPECT_EQ(nmr.b_xi, Eigen::MatrixXd(Eigen::Vector2d(0, 1)));
  EXPECT_EQ(nmr.l_xi, Eigen::MatrixXd(Eigen::Vector2d(1, 0)));
}

void expect_realization_relations(const ContinuousLTISystem& sys, const Eigen::MatrixXd& f,
                                  std::uint64_t seed) {
  const NonMinimalRealization nmr = canonical_realization(sys, luenberger_embedding(sys, f, seed));
  EXPECT_LE((sys.a * nmr.pi - nmr.pi * nmr.a_xi).norm(), 1e-8);
  EXPECT_LE((sys.b - nmr.pi * nmr.b_xi).norm(), 1e-8);
  EXPECT_LE((nmr.c_xi - sys.c * nmr.pi).norm(), 1e-8);
}

TEST(CanonicalRealizationTest, IntertwiningRelations) {
  expect_realization_relations(example1(), diag({-20, -36, -40}), 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    expect_realization_relations(random_minimal_system(3, 2, 2, seed), diag({-20, -36, -45}),
                                 seed + 50);
  }
}

TEST(CanonicalRealizationTest, Example1Stabilizable) {
  const ContinuousLTISystem sys = example1();
  const NonMinimalRealization nmr =
      canonical_realization(sys, luenberger_embedding(sys, diag({-20, -36, -40}), 2));
  EXPECT_EQ(nmr.a_xi.rows(), 36);
  EXPECT_TRUE(linalg::pbh_stabilizable(nmr.a_xi, nmr.b_xi, 1e-8));
}

TEST(ExtendedSystemTest, ZeroInitialStateDecouples) {
  const ContinuousLTISystem sys = example1();
  const Embedding emb = luenberger_embedding(sys, diag({-20, -36, -40}), 4);
  const ExtendedSystem ext =
      extended_system(sys, emb, canonical_realization(sys, emb), Eigen::Vector3d::Zero());
  EXPECT_TRUE(ext.gamma.isZero(0.0));
  EXPECT_TRUE(ext.a_e.bottomLeftCorner(36, 3).isZero(0.0));
  EXPECT_TRUE(ext.a_e.topRightCorner(3, 36).isZero(0.0));
}

TEST(ExtendedSystemTest, TransverseCoordinateClosedForm) {
  const ContinuousLTISystem sys = example1();
  const Eigen::MatrixXd f = diag({-20, -36, -40});
  const Embedding emb = luenberger_embedding(sys, f, 5);
  const Eigen::VectorXd x0 = testing::example1_x0();
  const ExtendedSystem ext = extended_system(sys, emb, canonical_realization(sys, emb), x0);
  const Eigen::VectorXd beta0 = emb.t_mat * x0;
  for (double t = 0.0; t <= 3.0; t += 0.25) {
    const Eigen::VectorXd chi = linalg::expm(f, t) * Eigen::VectorXd::Ones(3);
    const Eigen::VectorXd direct = linalg::expm(f, t) * beta0;
    EXPECT_LE((ext.gamma * chi - direct).norm(), 1e-10 * (1.0 + beta0.norm()));
  }
}

TEST(ExtendedSystemTest, SpectrumComposition) {
  const ContinuousLTISystem sys = example1();
  const Eigen::MatrixXd f = diag({-20, -36, -40});
  const Embedding emb = luenberger_embedding(sys, f, 6);
  const NonMinimalRealization nmr = canonical_realization(sys, emb);
  const ExtendedSystem ext = extended_system(sys, emb, nmr, testing::example1_x0());
  EXPECT_EQ(ext.a_e.rows(), 39);
  EXPECT_EQ(ext.b_e.cols(), 2);
  int unstable = 0;
  for (const auto& e : linalg::eigvals(ext.a_e).eigenvalues) {
    if (e.real() >= 0.0) ++unstable;
  }
  EXPECT_EQ(unstable, 3);
  EXPECT_NEAR(linalg::spectral_abscissa(ext.a_e), 3.2188, 1e-3);
}

TEST(RandomSystemTest, DeterministicAndMinimal) {
  const ContinuousLTISystem a = random_minimal_system(3, 2, 2, 9);
  const ContinuousLTISystem b = random_minimal_system(3, 2, 2, 9);
  EXPECT_EQ(a.a, b.a);
  EXPECT_EQ(a.b, b.b);
  EXPECT_EQ(a.c, b.c);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EXPECT_TRUE(check_minimality(random_minimal_system(3, 2, 2, seed)).minimal());
  }
  const ContinuousLTISystem scalar = random_minimal_system(1, 1, 1, 3);
  EXPECT_NE(scalar.b(0, 0), 0.0);
  EXPECT_NE(scalar.c(0, 0), 0.0);
  EXPECT_THROW(random_minimal_system(0, 1, 1, 0), DimensionError);
}

}  // namespace
}  // namespace kfstab::oracle
