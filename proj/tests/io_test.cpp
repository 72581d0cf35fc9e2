#include "kfstab/io.hpp"

#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kfstab/errors.hpp"
#include "kfstab/plant_oracle.hpp"
#include "scratch_dir.hpp"

namespace kfstab::io {
namespace {

using testing::ScratchDir;

TEST(MatrixJsonTest, RoundTrip) {
  std::mt19937_64 rng(40);
  const Eigen::MatrixXd a = testing::random_matrix(3, 4, rng);
  EXPECT_EQ(matrix_from_json(matrix_to_json(a), "a"), a);
  EXPECT_EQ(matrix_from_json(Json::parse("[1, 2, 3]"), "v"), Eigen::MatrixXd(Eigen::Vector3d(1, 2, 3)));
}

TEST(MatrixJsonTest, Malformed) {
  EXPECT_THROW(matrix_from_json(Json::parse("3"), "x"), FormatError);
  EXPECT_THROW(matrix_from_json(Json::parse("[[1, 2], [3]]"), "x"), FormatError);
  EXPECT_THROW(matrix_from_json(Json::parse("[[1, \"a\"]]"), "x"), FormatError);
}

TEST(SystemJsonTest, RoundTripAndValidation) {
  const ContinuousLTISystem sys = oracle::example1();
  const ContinuousLTISystem back = system_from_json(system_to_json(sys));
  EXPECT_EQ(back.a, sys.a);
  EXPECT_EQ(back.b, sys.b);
  EXPECT_EQ(back.c, sys.c);
  Json j = system_to_json(sys);
  j.erase("C");
  EXPECT_THROW(system_from_json(j), FormatError);
  j = system_to_json(sys);
  j["B"] = Json::parse("[[1], [2]]");
  EXPECT_THROW(system_from_json(j), FormatError);
}

TEST(ControllerJsonTest, RoundTrip) {
  Controller c;
  c.f = testing::diag({-2.0, -5.0});
  c.n = 2;
  c.m = 1;
  c.p = 1;
  std::mt19937_64 rng(41);
  c.k_e = testing::random_matrix(1, c.n_z(), rng);
  const Controller back = controller_from_json(controller_to_json(c));
  EXPECT_EQ(back.k_e, c.k_e);
  EXPECT_EQ(back.f, c.f);
  Json j = controller_to_json(c);
  j["m"] = 2;
  EXPECT_THROW(controller_from_json(j), FormatError);
}

TEST(LmiJsonTest, RoundTrip) {
  lmi::StabilizationLmi p = lmi::make_problem(Eigen::RowVector2d(1, 1), Eigen::RowVector2d(1, -2));
  p.decay_rate = 0.25;
  const lmi::StabilizationLmi back = lmi_problem_from_json(lmi_problem_to_json(p));
  EXPECT_EQ(back.z_a, p.z_a);
  EXPECT_EQ(back.z_a_dot, p.z_a_dot);
  EXPECT_EQ(back.epsilon, p.epsilon);
  EXPECT_EQ(back.decay_rate, 0.25);
  EXPECT_EQ(back.max_modulus, 0.0);
}

TEST(ReportJsonTest, ContainsAuditFields) {
  RunReport r;
  r.l = 12;
  r.samples = 301;
  r.sigma0 = {3.0, 2.0};
  const Json j = report_to_json(r);
  for (const char* key : {"stage", "l", "N", "sigma0", "residuals", "excitation", "warnings"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["N"], 301);
}

TEST(DatasetCsvTest, ExactRoundTrip) {
  ScratchDir dir("io");
  const Dataset data = simulate_plant(oracle::example1(), testing::example1_x0(), multisine(2, 2),
                                      0.5, 1e-3, 1e-4);
  write_dataset_csv(dir / "d.csv", data);
  const Dataset back = read_dataset_csv(dir / "d.csv");
  EXPECT_EQ(back.times, data.times);
  EXPECT_EQ(back.u, data.u);
  EXPECT_EQ(back.y, data.y);
  EXPECT_EQ(testing::slurp(dir / "d.csv").substr(0, 20), "t,u_1,u_2,y_1,y_2\n0,");
}

TEST(DatasetCsvTest, Malformed) {
  ScratchDir dir("io");
  const auto expect_bad = [&](const std::string& text) {
    testing::dump(dir / "bad.csv", text);
    EXPECT_THROW(read_dataset_csv(dir / "bad.csv"), FormatError) << text;
  };
  expect_bad("");
  expect_bad("time,u_1,y_1\n0,1,2\n");
  expect_bad("t,y_1,u_1\n0,1,2\n");
  expect_bad("t,u_1,y_1\n0,1\n");
  expect_bad("t,u_1,y_1\n0,1,abc\n");
  expect_bad("t,u_1,y_1\n0,1,2\n0,1,2\n");
  EXPECT_THROW(read_dataset_csv(dir / "missing.csv"), FormatError);
}

TEST(JsonFileTest, ReadErrors) {
  ScratchDir dir("io");
  testing::dump(dir / "bad.json", "{not json");
  EXPECT_THROW(read_json(dir / "bad.json"), FormatError);
  EXPECT_THROW(read_json(dir / "missing.json"), FormatError);
  write_json(dir / "ok.json", Json{{"a", 1}});
  EXPECT_EQ(read_json(dir / "ok.json")["a"], 1);
}

TEST(CsvWritersTest, Headers) {
  ScratchDir dir("io");
  Spectrum s;
  s.eigenvalues = {{-1.0, 2.0}, {-1.0, -2.0}};
  write_spectrum_csv(dir / "s.csv", s);
  EXPECT_EQ(testing::slurp(dir / "s.csv"), "re,im\n-1,2\n-1,-2\n");

  ClosedLoopTrajectory traj;
  traj.times = {0.0};
  traj.x = Eigen::MatrixXd::Ones(2, 1);
  traj.x_norm = Eigen::VectorXd::Constant(1, std::sqrt(2.0));
  traj.m_norm = Eigen::VectorXd::Zero(1);
  write_trajectory_csv(dir / "t.csv", traj);
  EXPECT_EQ(testing::slurp(dir / "t.csv").substr(0, 20), "t,norm_x,x_1,x_2,nor");
}

}  // namespace
}  // namespace kfstab::io
