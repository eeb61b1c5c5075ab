#pragma once

// Experiment plumbing behind the command-line tool: run tables, parameter
// sweeps aggregated over seeds, and allocation requests.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "earnet/audio_control.hpp"
#include "earnet/pipeline.hpp"
#include "earnet/simulator.hpp"

namespace earnet {

inline constexpr std::string_view kRunCsvSchema = "earnet.run/1";
inline constexpr std::string_view kSweepCsvSchema = "earnet.sweep/1";
inline constexpr std::string_view kExperimentSchema = "earnet.experiment/1";
inline constexpr std::string_view kAllocationSchema = "earnet.allocation/1";

/// Formats a double the same way on every run: shortest of %.10g.
std::string format_number(double v);

std::string run_csv(const std::vector<WindowRow>& rows);

struct ExperimentConfig {
  SimulationConfig scenario;
  std::vector<std::uint64_t> seeds;
  std::size_t numObservations = 50;  // batches per cold start when not on the axis
  double batchIntervalS = 1.0;
  int budget = 128;  // listener budget when not on the axis
  double thresholdMs = kDefaultDelayThresholdMs;
  // Sweep axes; an empty list skips the axis.
  std::vector<std::size_t> numNodes;
  std::vector<RoomClass> roomSize;
  std::vector<double> speed;
  std::vector<double> doaSigmaDeg;
  std::vector<std::size_t> observations;
  std::vector<int> budgets;
  void validate() const;  // throws InvalidConfig
};

/// `source` names the file in diagnostics; a "scenario" given as a string is
/// a config path resolved against `baseDir`.
ExperimentConfig parse_experiment_config(std::string_view text, std::string_view source = "experiment",
                                         const std::string& baseDir = ".");

struct Summary {
  std::size_t count = 0;  // finite samples
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Linear-interpolation quartiles over the finite entries; NaN when empty.
Summary summarize(std::vector<double> samples);

struct SweepPoint {
  std::string value;
  std::size_t seeds = 0;
  std::size_t solved = 0;
  std::vector<Summary> metrics;  // parallel to SweepTable::metricNames
};

struct SweepTable {
  std::string axis;
  std::vector<std::string> metricNames;
  std::vector<SweepPoint> points;
};

/// One table per nonempty axis, in the order numNodes, roomSize, speed,
/// doaSigmaDeg, observations, budget. Seeds run on `workers` threads (0: one
/// per core); results do not depend on the worker count.
std::vector<SweepTable> run_sweep(const ExperimentConfig& config, unsigned workers = 0);

std::string sweep_csv(const SweepTable& table);

struct AllocationRequest {
  std::vector<StreamDescriptor> streams;
  int budget = 0;
  double thresholdMs = kDefaultDelayThresholdMs;
};

AllocationRequest parse_allocation_request(std::string_view text, std::string_view source = "streams");

/// The chosen plan plus the utilities of the baseline strategies.
std::string allocation_report_json(const AllocationRequest& request);

}  // namespace earnet
