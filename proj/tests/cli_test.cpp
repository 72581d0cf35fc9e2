#include "kfstab/commands.hpp"

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "scratch_dir.hpp"

namespace kfstab::cli {
namespace {

using testing::ScratchDir;
using testing::slurp;

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "kfstab");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Invocation inv;
  inv.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  inv.out = out.str();
  inv.err = err.str();
  return inv;
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

TEST(CliTest, SimulateExample1) {
  ScratchDir dir("cli");
  const Invocation inv = invoke({"simulate", "--plant", "example1", "--tD", "3", "--record-dt",
                                 "0.001", "--out", dir.str()});
  ASSERT_EQ(inv.code, kExitOk) << inv.err;
  EXPECT_EQ(count_lines(slurp(dir / "dataset.csv")), 3001 + 1);
}

TEST(CliTest, SimulateIsDeterministicPerSeed) {
  ScratchDir dir("cli");
  for (const char* name : {"a.csv", "b.csv"}) {
    ASSERT_EQ(invoke({"simulate", "--tD", "1", "--seed", "5", "--out", dir / name}).code, kExitOk);
  }
  ASSERT_EQ(invoke({"simulate", "--tD", "1", "--seed", "6", "--out", dir / "c.csv"}).code, kExitOk);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
}

TEST(CliTest, UsageErrors) {
  ScratchDir dir("cli");
  EXPECT_EQ(invoke({"simulate", "--tD", "0", "--out", dir.str()}).code, kExitUsage);
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(invoke({"synthesize", "--n", "3"}).code, kExitUsage);
  EXPECT_EQ(invoke({"synthesize", "--n", "3", "--data", dir / "missing.csv"}).code, kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--plant", "random", "--dims", "2,1", "--out", dir.str()}).code,
            kExitUsage);
  EXPECT_EQ(invoke({"simulate", "--record-dt", "0.001", "--int-dt", "0.0003", "--out", dir.str()})
                .code,
            kExitUsage);
  EXPECT_EQ(invoke({"montecarlo", "--trials", "-1", "--out", dir.str()}).code, kExitUsage);
}

TEST(CliTest, ConfigFileSuppliesDefaults) {
  ScratchDir dir("cli");
  testing::dump(dir / "cfg.json", R"({"tD": 0.5, "record-dt": 0.01, "seed": 3})");
  ASSERT_EQ(invoke({"simulate", "--config", dir / "cfg.json", "--out", dir / "d.csv"}).code,
            kExitOk);
  EXPECT_EQ(count_lines(slurp(dir / "d.csv")), 51 + 1);
  ASSERT_EQ(invoke({"simulate", "--config", dir / "cfg.json", "--tD", "1", "--out",
                    dir / "e.csv"})
                .code,
            kExitOk);
  EXPECT_EQ(count_lines(slurp(dir / "e.csv")), 101 + 1);
  testing::dump(dir / "bad.json", R"({"no-such-key": 1})");
  EXPECT_EQ(invoke({"simulate", "--config", dir / "bad.json", "--out", dir.str()}).code,
            kExitUsage);
}

TEST(CliTest, SynthesizeAndVerifyExample1) {
  ScratchDir dir("cli");
  ASSERT_EQ(invoke({"simulate", "--x0", "-1,1,2", "--out", dir / "data.csv"}).code, kExitOk);
  const Invocation synth =
      invoke({"synthesize", "--data", dir / "data.csv", "--n", "3", "--out", dir.str()});
  ASSERT_EQ(synth.code, kExitOk) << synth.out << synth.err;
  const io::Json controller = io::read_json(dir / "controller.json");
  EXPECT_EQ(controller["K_e"].size(), 2u);
  EXPECT_EQ(controller["K_e"][0].size(), 39u);
  const io::Json report = io::read_json(dir / "report.json");
  for (const char* key : {"l", "N", "sigma0", "residuals"}) EXPECT_TRUE(report.contains(key));
  EXPECT_EQ(report["l"], 12);

  const Invocation verify = invoke({"verify", "--controller", dir / "controller.json", "--out",
                                    dir.str()});
  ASSERT_EQ(verify.code, kExitOk) << verify.err;
  std::istringstream spectrum(slurp(dir / "spectrum.csv"));
  std::string line;
  std::getline(spectrum, line);
  int rows = 0;
  while (std::getline(spectrum, line)) {
    ++rows;
    EXPECT_LT(std::stod(line.substr(0, line.find(','))), 0.0) << line;
  }
  EXPECT_EQ(rows, 39);
  EXPECT_NE(slurp(dir / "trajectory.csv").find("t,norm_x"), std::string::npos);
}

TEST(CliTest, ZeroGainControllerShowsUnstableMode) {
  ScratchDir dir("cli");
  io::Json c;
  c["F"] = {{-20, 0, 0}, {0, -36, 0}, {0, 0, -40}};
  c["K_e"] = io::matrix_to_json(Eigen::MatrixXd::Zero(2, 39));
  c["n"] = 3;
  c["m"] = 2;
  c["p"] = 2;
  io::write_json(dir / "zero.json", c);
  ASSERT_EQ(invoke({"verify", "--controller", dir / "zero.json", "--t-end", "1", "--out",
                    dir.str()})
                .code,
            kExitOk);
  bool found = false;
  std::istringstream spectrum(slurp(dir / "spectrum.csv"));
  std::string line;
  std::getline(spectrum, line);
  while (std::getline(spectrum, line)) {
    if (std::abs(std::stod(line.substr(0, line.find(','))) - 3.2188) < 1e-3) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(CliTest, SilentInputFailsSynthesis) {
  ScratchDir dir("cli");
  ASSERT_EQ(invoke({"simulate", "--amp-min", "0", "--amp-max", "0", "--out", dir / "d.csv"}).code,
            kExitOk);
  EXPECT_EQ(invoke({"synthesize", "--data", dir / "d.csv", "--n", "3", "--out", dir.str()}).code,
            kExitSynthesis);
  EXPECT_EQ(io::read_json(dir / "report.json")["stage"], "check_excitation");
}

TEST(CliTest, MonteCarloEmptyAndDeterministic) {
  ScratchDir dir("cli");
  ASSERT_EQ(invoke({"montecarlo", "--trials", "0", "--out", dir / "empty.json"}).code, kExitOk);
  const io::Json empty = io::read_json(dir / "empty.json");
  EXPECT_EQ(empty["trials"], 0);
  EXPECT_TRUE(empty["success_rate"].is_null());

  for (const char* name : {"a.json", "b.json"}) {
    ASSERT_EQ(invoke({"montecarlo", "--dims", "2,1,1", "--trials", "3", "--seed", "9",
                      "--threads", "2", "--out", dir / name})
                  .code,
              kExitOk);
  }
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_EQ(io::read_json(dir / "a.json")["trials"], 3);
}

TEST(TrialSeedTest, DistinctAndStable) {
  EXPECT_EQ(trial_seed(1, 0), trial_seed(1, 0));
  EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
  EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
}

TEST(RunConfigTest, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.freq_min = 30.0;
  EXPECT_THROW(c.validate(), UsageError);
  c = RunConfig{};
  c.period = -1.0;
  EXPECT_THROW(c.validate(), UsageError);
}

}  // namespace
}  // namespace kfstab::cli
