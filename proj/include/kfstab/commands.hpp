#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kfstab/errors.hpp"
#include "kfstab/io.hpp"
#include "kfstab/system.hpp"

namespace kfstab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitSimulation = 2;
inline constexpr int kExitSynthesis = 3;

/// Bad flags or configuration values.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Dims {
  int n = 2;
  int m = 1;
  int p = 1;
};

/// Settings shared by every subcommand. A JSON config file uses the same
/// keys as the long flags; flags given on the command line win.
struct RunConfig {
  std::string plant = "example1";  // "example1", "random" or a JSON file
  Dims dims;                       // used when plant == "random"
  std::vector<double> filter;      // filter eigenvalues; empty selects the default
  std::vector<double> x0;          // experiment (or verification) initial state
  double t_d = 3.0;
  double record_dt = 1e-3;
  double int_dt = 1e-4;
  double period = 0.01;
  double rank_tol = 1e-8;
  double excitation_tol = 1e-8;
  double epsilon = 0.0;  // 0 selects the data-scaled default
  std::optional<double> decay_rate;
  std::optional<double> max_modulus;
  double freq_min = 0.5;
  double freq_max = 20.0;
  double amp_min = 0.5;
  double amp_max = 2.0;
  std::uint64_t seed = 1;
  std::string out = ".";

  /// Throws UsageError.
  void validate() const;
};

/// Reads the keys present in `j` into `config`. Throws UsageError on unknown
/// keys or wrong types.
void apply_config(const io::Json& j, RunConfig& config);

/// Plant selected by config.plant; random plants are drawn from config.seed.
ContinuousLTISystem load_plant(const RunConfig& config);

struct MonteCarloSpec {
  Dims dims;
  int trials = 50;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 selects the hardware concurrency
};

struct TrialOutcome {
  int index = 0;
  std::uint64_t seed = 0;
  std::string stage;  // "complete" or the failing stage
  double abscissa = 0.0;
  bool hurwitz = false;
};

/// Per-trial seed derived from the campaign seed by SplitMix64.
std::uint64_t trial_seed(std::uint64_t campaign_seed, int index);

/// One randomized simulate -> synthesize -> verify run.
TrialOutcome run_trial(const Dims& dims, std::uint64_t seed, const RunConfig& base);

/// Runs the trials across worker threads; results are ordered by index.
std::vector<TrialOutcome> run_campaign(const MonteCarloSpec& spec, const RunConfig& base);

io::Json summarize(const MonteCarloSpec& spec, const std::vector<TrialOutcome>& trials);

/// Entry point of the command-line tool. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kfstab::cli
