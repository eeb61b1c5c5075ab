// Command-line front end: simulate, run, sweep, allocate.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "earnet/error.hpp"
#include "earnet/experiment.hpp"
#include "earnet/pipeline.hpp"
#include "earnet/serialization.hpp"

namespace fs = std::filesystem;
using namespace earnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPrecondition = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, path + ": cannot read file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) throw std::runtime_error(path.string() + ": cannot write file");
}

void emit(const std::string& outPath, const std::string& body) {
  if (outPath.empty() || outPath == "-") {
    std::cout << body;
  } else {
    write_file(outPath, body);
  }
}

/// A scenario file, or a simulation config to generate one from. `seed`
/// regenerates either with a different seed.
Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed) {
  const std::string text = read_file(path);
  if (text.find(kScenarioSchema) != std::string::npos) {
    Scenario sc = scenario_from_json(text, path);
    return seed ? generate_scenario(sc.config, *seed) : sc;
  }
  SimulationConfig config = parse_simulation_config(text, path);
  if (seed) config.seed = *seed;
  return generate_scenario(config);
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidConfig:
      return kExitConfig;
    case ErrorCode::InsufficientObservations:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::ZeroTotalWeight:
      return kExitPrecondition;
    default:
      return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mobile earphone-network calibration, grouping and relay allocation"};
  app.require_subcommand(1);

  std::string input, out;
  std::optional<std::uint64_t> seed;
  std::size_t window = WindowConfig{}.windowLength;
  double decayFloor = WindowConfig{}.decayFloor;
  double batchInterval = PipelineOptions{}.batchIntervalS;
  bool timing = false;
  unsigned workers = 0;
  std::optional<int> budget;
  std::optional<int> thresholdMs;

  auto* simulate = app.add_subcommand("simulate", "Write scenario.json and ground_truth.json for a config");
  simulate->add_option("config", input, "Simulation config JSON")->required();
  simulate->add_option("--seed", seed, "Override the config seed");
  simulate->add_option("--out", out, "Output directory")->default_str(".");

  auto* run = app.add_subcommand("run", "Calibrate over a scenario and write per-window metrics CSV");
  run->add_option("scenario", input, "Scenario JSON, or a simulation config to generate one")->required();
  run->add_option("--seed", seed, "Regenerate the scenario with this seed");
  run->add_option("--out", out, "Output CSV (default stdout)");
  run->add_option("--window", window, "Sliding window length in batches")->check(CLI::Range(2, 100000));
  run->add_option("--decay-floor", decayFloor, "Time-decay floor in seconds")->check(CLI::PositiveNumber);
  run->add_option("--batch-interval", batchInterval, "Seconds between observation batches")
      ->check(CLI::PositiveNumber);
  run->add_flag("--timing", timing, "Report measured wall time (otherwise 0 for reproducible output)");

  auto* sweep = app.add_subcommand("sweep", "Aggregate metrics over seeds along each experiment axis");
  sweep->add_option("experiment", input, "Experiment JSON")->required();
  sweep->add_option("--seed", seed, "Run this single seed instead of the configured list");
  sweep->add_option("--out", out, "Output directory")->default_str(".");
  sweep->add_option("--workers", workers, "Worker threads (0: one per core)");

  auto* allocate = app.add_subcommand("allocate", "Allocate relay bandwidth over a listener's streams");
  allocate->add_option("streams", input, "Streams JSON")->required();
  allocate->add_option("--budget", budget, "Total budget in kbit/s (overrides the file)")
      ->check(CLI::NonNegativeNumber);
  allocate->add_option("--threshold-ms", thresholdMs, "Delay threshold for relay audio (overrides the file)")
      ->check(CLI::NonNegativeNumber);
  allocate->add_option("--out", out, "Output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (simulate->parsed()) {
      std::string text = read_file(input);
      SimulationConfig config = parse_simulation_config(text, input);
      if (seed) config.seed = *seed;
      const Scenario sc = generate_scenario(config);
      const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
      write_file(dir / "scenario.json", scenario_to_json(sc));
      write_file(dir / "ground_truth.json", ground_truth_to_json(sc));
    } else if (run->parsed()) {
      const Scenario sc = load_scenario(input, seed);
      PipelineOptions opt;
      opt.window = {window, decayFloor};
      opt.batchIntervalS = batchInterval;
      opt.timing = timing;
      emit(out, run_csv(run_pipeline(sc, opt)));
    } else if (sweep->parsed()) {
      ExperimentConfig exp =
          parse_experiment_config(read_file(input), input, fs::path(input).parent_path().string());
      if (seed) exp.seeds = {*seed};
      const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
      for (const auto& table : run_sweep(exp, workers)) {
        write_file(dir / ("sweep_" + table.axis + ".csv"), sweep_csv(table));
      }
    } else if (allocate->parsed()) {
      AllocationRequest req = parse_allocation_request(read_file(input), input);
      if (budget) req.budget = *budget;
      if (thresholdMs) req.thresholdMs = *thresholdMs;
      emit(out, allocation_report_json(req));
    }
  } catch (const Error& e) {
    std::cerr << "earnet: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "earnet: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
