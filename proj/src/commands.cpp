#include "kfstab/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "kfstab/kfilter.hpp"
#include "kfstab/plant_oracle.hpp"
#include "kfstab/simulation.hpp"
#include "kfstab/synthesis.hpp"

namespace kfstab::cli {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw UsageError(std::string(name) + " must be positive");
    }
  };
  positive(t_d, "--tD");
  positive(record_dt, "--record-dt");
  positive(int_dt, "--int-dt");
  positive(period, "--period");
  positive(rank_tol, "--rank-tol");
  positive(excitation_tol, "--excitation-tol");
  if (rank_tol >= 1.0 || excitation_tol >= 1.0) throw UsageError("tolerances must be below 1");
  if (epsilon < 0.0) throw UsageError("--epsilon must be positive (or 0 for the default)");
  if (decay_rate && !(*decay_rate >= 0.0)) throw UsageError("--decay-rate must be >= 0");
  if (max_modulus && !(*max_modulus >= 0.0)) throw UsageError("--max-modulus must be >= 0");
  if (period < record_dt) throw UsageError("--period must be at least --record-dt");
  if (int_dt > record_dt) throw UsageError("--int-dt must not exceed --record-dt");
  if (dims.n < 1 || dims.m < 1 || dims.p < 1) throw UsageError("--dims entries must be positive");
  if (amp_min < 0.0 || amp_max < amp_min) throw UsageError("invalid amplitude range");
  if (!(freq_min > 0.0) || !(freq_max > freq_min)) throw UsageError("invalid frequency range");
  for (std::size_t i = 0; i < filter.size(); ++i) {
    if (!(filter[i] < 0.0)) throw UsageError("--filter eigenvalues must be negative");
    for (std::size_t j = 0; j < i; ++j) {
      if (filter[i] == filter[j]) throw UsageError("--filter eigenvalues must be distinct");
    }
  }
}

void apply_config(const io::Json& j, RunConfig& c) {
  if (!j.is_object()) throw UsageError("config: expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "plant") {
        c.plant = value.get<std::string>();
      } else if (key == "dims") {
        const auto d = value.get<std::vector<int>>();
        if (d.size() != 3) throw UsageError("config: dims must have three entries");
        c.dims = Dims{d[0], d[1], d[2]};
      } else if (key == "filter") {
        c.filter = value.get<std::vector<double>>();
      } else if (key == "x0") {
        c.x0 = value.get<std::vector<double>>();
      } else if (key == "tD") {
        c.t_d = value.get<double>();
      } else if (key == "record-dt") {
        c.record_dt = value.get<double>();
      } else if (key == "int-dt") {
        c.int_dt = value.get<double>();
      } else if (key == "period") {
        c.period = value.get<double>();
      } else if (key == "rank-tol") {
        c.rank_tol = value.get<double>();
      } else if (key == "excitation-tol") {
        c.excitation_tol = value.get<double>();
      } else if (key == "epsilon") {
        c.epsilon = value.get<double>();
      } else if (key == "decay-rate") {
        c.decay_rate = value.get<double>();
      } else if (key == "max-modulus") {
        c.max_modulus = value.get<double>();
      } else if (key == "freq-min") {
        c.freq_min = value.get<double>();
      } else if (key == "freq-max") {
        c.freq_max = value.get<double>();
      } else if (key == "amp-min") {
        c.amp_min = value.get<double>();
      } else if (key == "amp-max") {
        c.amp_max = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "out") {
        c.out = value.get<std::string>();
      } else {
        throw UsageError("config: unknown key '" + key + "'");
      }
    }
  } catch (const io::Json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

ContinuousLTISystem load_plant(const RunConfig& config) {
  if (config.plant == "example1") return oracle::example1();
  if (config.plant == "random") {
    return oracle::random_minimal_system(config.dims.n, config.dims.m, config.dims.p,
                                         config.seed);
  }
  return io::system_from_json(io::read_json(config.plant));
}

namespace {

Eigen::MatrixXd filter_matrix(const RunConfig& config, int n) {
  if (config.filter.empty()) return default_filter(n);
  if (static_cast<int>(config.filter.size()) != n) {
    throw UsageError("--filter needs exactly n = " + std::to_string(n) + " eigenvalues");
  }
  return Eigen::Map<const Eigen::VectorXd>(config.filter.data(), n).asDiagonal();
}

Eigen::VectorXd initial_state(const std::vector<double>& given, int n, std::uint64_t seed) {
  if (!given.empty()) {
    if (static_cast<int>(given.size()) != n) {
      throw UsageError("--x0 needs exactly n = " + std::to_string(n) + " entries");
    }
    return Eigen::Map<const Eigen::VectorXd>(given.data(), n);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0(i) = normal(rng);
  return x0;
}

MultisineInput experiment_input(const RunConfig& config, int m, std::uint64_t seed) {
  return multisine(m, seed, {config.amp_min, config.amp_max},
                   {config.freq_min, config.freq_max});
}

SynthesisConfig synthesis_config(const RunConfig& config, int n) {
  SynthesisConfig s;
  s.n = n;
  s.f = filter_matrix(config, n);
  s.rank_tol = config.rank_tol;
  s.excitation_tol = config.excitation_tol;
  s.batch_rank_tol = config.rank_tol;
  s.period = config.period;
  s.lmi_epsilon = config.epsilon;
  s.decay_rate = config.decay_rate;
  s.max_modulus = config.max_modulus;
  return s;
}

// Seeds of the experiment pieces, split so that they do not share streams.
std::uint64_t state_seed(std::uint64_t seed) { return trial_seed(seed, 1); }
std::uint64_t input_seed(std::uint64_t seed) { return trial_seed(seed, 2); }
std::uint64_t embedding_seed(std::uint64_t seed) { return trial_seed(seed, 3); }

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw UsageError("cannot create output directory " + dir);
  return p;
}

// A directory (or a path ending in a separator) receives `fallback` inside it.
fs::path output_file(const std::string& out, const char* fallback) {
  fs::path p(out);
  if (fs::is_directory(p) || !p.has_filename()) {
    prepare_dir(p.string());
    return p / fallback;
  }
  if (p.has_parent_path()) prepare_dir(p.parent_path().string());
  return p;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

int cmd_simulate(const RunConfig& config, const std::string& plant_out, std::ostream& out) {
  const ContinuousLTISystem sys = load_plant(config);
  const Eigen::VectorXd x0 = initial_state(config.x0, sys.n(), state_seed(config.seed));
  const MultisineInput input = experiment_input(config, sys.m(), input_seed(config.seed));
  Dataset data;
  try {
    data = simulate_plant(sys, x0, input, config.t_d, config.record_dt, config.int_dt);
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
  const fs::path path = output_file(config.out, "dataset.csv");
  io::write_dataset_csv(path.string(), data);
  if (!plant_out.empty()) io::write_json(plant_out, io::system_to_json(sys));
  out << "wrote " << data.size() << " samples to " << path.string() << '\n';
  return kExitOk;
}

int cmd_synthesize(const RunConfig& config, const std::string& data_path, int n,
                   std::ostream& out) {
  if (n < 1) throw UsageError("--n must be positive");
  const Dataset data = io::read_dataset_csv(data_path);
  const fs::path dir = prepare_dir(config.out);
  try {
    const SynthesisResult result = synthesize(data, synthesis_config(config, n));
    io::write_json((dir / "controller.json").string(), io::controller_to_json(result.controller));
    io::write_json((dir / "report.json").string(), io::report_to_json(result.report));
    io::write_json((dir / "decomposition.json").string(),
                   io::decomposition_to_json(result.decomposition));
    out << "l = " << result.report.l << ", N = " << result.report.samples
        << ", K_e is " << result.controller.k_e.rows() << "x" << result.controller.k_e.cols()
        << '\n';
    for (const std::string& w : result.report.warnings) out << "warning: " << w << '\n';
    return kExitOk;
  } catch (const SynthesisError& e) {
    io::write_json((dir / "report.json").string(), io::report_to_json(e.report()));
    out << "synthesis failed at stage " << e.stage() << ": " << e.what() << '\n';
    return kExitSynthesis;
  }
}

int cmd_verify(const RunConfig& config, const std::string& controller_path, double t_end,
               std::ostream& out) {
  const ContinuousLTISystem sys = load_plant(config);
  const Controller controller = io::controller_from_json(io::read_json(controller_path));
  if (controller.n != sys.n() || controller.m != sys.m() || controller.p != sys.p()) {
    throw UsageError("controller dimensions do not match the plant");
  }
  std::vector<double> given = config.x0;
  if (given.empty() && sys.n() == 3) given = {-1.0, 1.0, 2.0};
  if (given.empty()) given.assign(sys.n(), 1.0);
  const Eigen::VectorXd x0 = initial_state(given, sys.n(), 0);

  const oracle::Embedding emb =
      oracle::luenberger_embedding(sys, controller.f, embedding_seed(config.seed));
  const oracle::NonMinimalRealization nmr = oracle::canonical_realization(sys, emb);
  const oracle::ExtendedSystem ext = oracle::extended_system(sys, emb, nmr, x0);
  const Spectrum spectrum = verify_closed_loop(controller, ext);

  const fs::path dir = prepare_dir(config.out);
  io::write_spectrum_csv((dir / "spectrum.csv").string(), spectrum);
  const ClosedLoopTrajectory traj =
      simulate_closed_loop(sys, controller, x0, t_end, config.int_dt, config.period);
  io::write_trajectory_csv((dir / "trajectory.csv").string(), traj);
  out << "abscissa = " << spectrum.abscissa
      << (spectrum.abscissa < 0.0 ? " (Hurwitz)" : " (not Hurwitz)") << '\n';
  out << "|x(" << t_end << ")| / |x0| = " << traj.x_norm(traj.x_norm.size() - 1) / x0.norm()
      << '\n';
  return kExitOk;
}

int cmd_montecarlo(const MonteCarloSpec& spec, const RunConfig& config, std::ostream& out) {
  if (spec.trials < 0) throw UsageError("--trials must be non-negative");
  if (spec.dims.n < 1 || spec.dims.m < 1 || spec.dims.p < 1) {
    throw UsageError("--dims entries must be positive");
  }
  const io::Json summary = summarize(spec, run_campaign(spec, config));
  const fs::path path = output_file(config.out, "summary.json");
  io::write_json(path.string(), summary);
  out << "successes " << summary["successes"] << " / " << spec.trials << '\n';
  return kExitOk;
}

std::vector<double> split_doubles(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw UsageError("expected a comma-separated list of numbers, got '" + text + "'");
    }
  }
  return values;
}

Dims parse_dims(const std::string& text) {
  const std::vector<double> v = split_doubles(text);
  if (v.size() != 3) throw UsageError("--dims expects n,m,p");
  return Dims{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t campaign_seed, int index) {
  std::uint64_t z = campaign_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TrialOutcome run_trial(const Dims& dims, std::uint64_t seed, const RunConfig& base) {
  TrialOutcome outcome;
  outcome.seed = seed;
  ContinuousLTISystem sys;
  try {
    sys = oracle::random_minimal_system(dims.n, dims.m, dims.p, seed);
  } catch (const Error&) {
    outcome.stage = "plant";
    return outcome;
  }
  const Eigen::VectorXd x0 = initial_state({}, dims.n, state_seed(seed));
  Dataset data;
  try {
    data = simulate_plant(sys, x0, experiment_input(base, dims.m, input_seed(seed)), base.t_d,
                          base.record_dt, base.int_dt);
  } catch (const Error&) {
    outcome.stage = "simulate";
    return outcome;
  }
  SynthesisConfig config = synthesis_config(base, dims.n);
  SynthesisResult result;
  try {
    result = synthesize(data, config);
  } catch (const SynthesisError& e) {
    outcome.stage = e.stage();
    return outcome;
  }
  try {
    const oracle::Embedding emb =
        oracle::luenberger_embedding(sys, result.controller.f, embedding_seed(seed));
    const oracle::NonMinimalRealization nmr = oracle::canonical_realization(sys, emb);
    const oracle::ExtendedSystem ext = oracle::extended_system(sys, emb, nmr, x0);
    outcome.abscissa = verify_closed_loop(result.controller, ext).abscissa;
  } catch (const Error&) {
    outcome.stage = "oracle";
    return outcome;
  }
  outcome.hurwitz = outcome.abscissa < 0.0;
  outcome.stage = outcome.hurwitz ? "complete" : "verify";
  return outcome;
}

std::vector<TrialOutcome> run_campaign(const MonteCarloSpec& spec, const RunConfig& base) {
  std::vector<TrialOutcome> results(std::max(spec.trials, 0));
  if (results.empty()) return results;
  int workers = spec.threads > 0 ? spec.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, spec.trials);
  std::atomic<int> next{0};
  const auto work = [&] {
    for (int i = next++; i < spec.trials; i = next++) {
      results[i] = run_trial(spec.dims, trial_seed(spec.seed, i), base);
      results[i].index = i;
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  return results;
}

io::Json summarize(const MonteCarloSpec& spec, const std::vector<TrialOutcome>& trials) {
  io::Json j;
  j["dims"] = {spec.dims.n, spec.dims.m, spec.dims.p};
  j["trials"] = trials.size();
  j["seed"] = spec.seed;
  std::vector<double> abscissas;
  std::map<std::string, int> failures;
  int successes = 0;
  io::Json detail = io::Json::array();
  for (const TrialOutcome& t : trials) {
    if (t.hurwitz) {
      ++successes;
      abscissas.push_back(t.abscissa);
    } else {
      ++failures[t.stage];
    }
    detail.push_back({{"index", t.index},
                      {"seed", t.seed},
                      {"stage", t.stage},
                      {"abscissa", t.abscissa}});
  }
  j["successes"] = successes;
  j["success_rate"] =
      trials.empty() ? io::Json(nullptr) : io::Json(static_cast<double>(successes) / trials.size());
  if (abscissas.empty()) {
    j["abscissa_quantiles"] = nullptr;
  } else {
    j["abscissa_quantiles"] = {{"min", quantile(abscissas, 0.0)},
                               {"q25", quantile(abscissas, 0.25)},
                               {"median", quantile(abscissas, 0.5)},
                               {"q75", quantile(abscissas, 0.75)},
                               {"max", quantile(abscissas, 1.0)}};
  }
  io::Json histogram = io::Json::object();
  for (const auto& [stage, count] : failures) histogram[stage] = count;
  j["failure_stages"] = histogram;
  j["trials_detail"] = detail;
  return j;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  // Config file values are loaded first so that explicit flags override them.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        apply_config(io::read_json(argv[i + 1]), config);
      } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
      }
    }
  }

  CLI::App app{"Data-driven stabilization of LTI systems with the Kreisselmeier filter"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with default flag values");

  std::string filter_text;
  std::string x0_text;
  std::string dims_text;
  double decay_rate = -1.0;
  double max_modulus = -1.0;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--plant", config.plant, "example1, random, or a system JSON file");
    sub->add_option("--dims", dims_text, "n,m,p for random plants");
    sub->add_option("--filter", filter_text, "filter eigenvalues, comma separated");
    sub->add_option("--x0", x0_text, "initial state, comma separated");
    sub->add_option("--tD", config.t_d, "experiment length in seconds");
    sub->add_option("--record-dt", config.record_dt, "sampling interval of the record");
    sub->add_option("--int-dt", config.int_dt, "integration step");
    sub->add_option("--period", config.period, "batch sampling period");
    sub->add_option("--rank-tol", config.rank_tol, "relative rank tolerance");
    sub->add_option("--excitation-tol", config.excitation_tol, "interval-excitation threshold");
    sub->add_option("--epsilon", config.epsilon, "LMI margin (0 selects the default)");
    sub->add_option("--decay-rate", decay_rate, "closed-loop decay margin");
    sub->add_option("--max-modulus", max_modulus, "closed-loop eigenvalue modulus bound");
    sub->add_option("--freq-min", config.freq_min, "lowest input frequency, rad/s");
    sub->add_option("--freq-max", config.freq_max, "highest input frequency, rad/s");
    sub->add_option("--amp-min", config.amp_min, "smallest input amplitude");
    sub->add_option("--amp-max", config.amp_max, "largest input amplitude");
    sub->add_option("--seed", config.seed, "random seed");
    sub->add_option("--out", config.out, "output file or directory");
    sub->add_option("--config", config_path, "JSON file with default flag values");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "record an input-output experiment");
  common(simulate);
  std::string plant_out;
  simulate->add_option("--plant-out", plant_out, "also write the plant as JSON");

  CLI::App* synth = app.add_subcommand("synthesize", "design a controller from a dataset");
  common(synth);
  std::string data_path;
  int order = 0;
  synth->add_option("--data", data_path, "dataset CSV")->required();
  synth->add_option("--n", order, "plant order")->required();

  CLI::App* verify = app.add_subcommand("verify", "check a controller against the true plant");
  common(verify);
  std::string controller_path;
  double t_end = 10.0;
  verify->add_option("--controller", controller_path, "controller JSON")->required();
  verify->add_option("--t-end", t_end, "closed-loop simulation length");

  CLI::App* mc = app.add_subcommand("montecarlo", "randomized synthesis campaign");
  common(mc);
  MonteCarloSpec spec;
  mc->add_option("--trials", spec.trials, "number of trials");
  mc->add_option("--threads", spec.threads, "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (!filter_text.empty()) config.filter = split_doubles(filter_text);
    if (!x0_text.empty()) config.x0 = split_doubles(x0_text);
    if (!dims_text.empty()) config.dims = parse_dims(dims_text);
    if (decay_rate >= 0.0) config.decay_rate = decay_rate;
    if (max_modulus >= 0.0) config.max_modulus = max_modulus;
    config.validate();

    if (simulate->parsed()) return cmd_simulate(config, plant_out, out);
    if (synth->parsed()) return cmd_synthesize(config, data_path, order, out);
    if (verify->parsed()) return cmd_verify(config, controller_path, t_end, out);
    spec.dims = config.dims;
    spec.seed = config.seed;
    return cmd_montecarlo(spec, config, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BlowUpError& e) {
    err << "simulation failed: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace kfstab::cli
