#pragma once

// End-to-end run over a simulated scenario: observation alignment, level-based
// distance estimation, sliding-window calibration and grouping metrics.

#include <cstddef>
#include <optional>
#include <vector>

#include "earnet/alignment.hpp"
#include "earnet/conversation.hpp"
#include "earnet/geometry.hpp"
#include "earnet/mobile.hpp"
#include "earnet/simulator.hpp"

namespace earnet {

/// Weight of a level-derived distance observation relative to a unit DoA term.
inline constexpr double kDistanceObservationWeight = 0.25;

/// Time-decay floor that makes the decay weights effectively uniform.
inline constexpr double kNoDecayFloorS = 1e9;

struct PipelineOptions {
  double batchIntervalS = 1.0;
  WindowConfig window;
  CalibrationOptions calibration;
  AlignmentOptions alignment;
  bool timing = false;  // wallTimeMs stays 0 unless set, keeping output reproducible
  void validate() const;
};

struct PipelineBatch {
  std::size_t frame = 0;
  ObservationBatch batch;
  std::size_t droppedObservations = 0;  // unidentified speaker or implausible level
};

/// First frame of each batch interval that falls inside a single-source segment.
std::vector<std::size_t> select_batch_frames(const Scenario& scenario, double batchIntervalS);

/// Aligns one frame's observations and turns them into calibration input.
PipelineBatch build_batch(const Scenario& scenario, std::size_t frame, const AlignmentOptions& alignment = {});

std::vector<PipelineBatch> build_batches(const Scenario& scenario, const PipelineOptions& options);

/// Estimated poses rigidly fitted onto the true positions, as snapshots.
std::vector<NodePoseSnapshot> aligned_snapshots(std::span<const Pose2> estimated,
                                                std::span<const NodePoseSnapshot> truth);

struct WindowRow {
  std::size_t batchIndex = 0;
  std::size_t frame = 0;
  double timestamp = 0.0;
  bool fresh = false;
  GroupingMetrics metrics;
  double costBefore = 0.0;
  double costAfter = 0.0;
  int iterations = 0;
  double wallTimeMs = 0.0;
};

/// One row per batch after the first solvable window. Throws
/// InsufficientObservations when no window is ever solvable.
std::vector<WindowRow> run_pipeline(const Scenario& scenario, const PipelineOptions& options = {});

struct ColdStart {
  bool solved = false;
  std::size_t frame = 0;  // frame of the last batch used
  GroupingMetrics metrics;
  std::vector<NodePoseSnapshot> estimated;  // fitted onto truth; empty when unsolved
  std::vector<NodePoseSnapshot> truth;
};

/// Calibrates once over the first `numBatches` batches with uniform time
/// weights and scores the poses at the last of them. An unsolvable window
/// scores as if no node were interested in any other, with NaN pose errors.
ColdStart cold_start(const Scenario& scenario, std::size_t numBatches, const PipelineOptions& options = {});

inline GroupingMetrics cold_start_metrics(const Scenario& scenario, std::size_t numBatches,
                                          const PipelineOptions& options = {}) {
  return cold_start(scenario, numBatches, options).metrics;
}

}  // namespace earnet
