#pragma once

// Mobile calibration: IMU motion compensation and sliding-window
// recalibration with time-decayed weights.

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "earnet/geometry.hpp"
#include "earnet/observation.hpp"

namespace earnet {

/// Local point of `obs` expressed in the node's time-0 frame.
Vec2 motion_compensate(const MobileObservation& obs);
Vec2 motion_compensate(const PolarObservation& obs, const MotionDelta& motion);

/// Delta from time `start` to time k, given both relative to time 0.
MotionDelta rebase(const MotionDelta& start, const MotionDelta& k);

struct WindowConfig {
  std::size_t windowLength = 10;  // batches
  double decayFloor = 0.1;        // seconds

  void validate() const;  // throws InvalidConfig
};

/// w_i = 1 / (now - t_i + decayFloor).
std::vector<double> time_decay_weights(std::span<const double> timestamps, double now, const WindowConfig& cfg);

struct AlignedObservation {
  std::size_t node = 0;
  std::size_t source = 0;  // aligned source id, unique within the batch
  PolarObservation obs;
};

/// All nodes' observations for one time index.
struct ObservationBatch {
  double timestamp = 0.0;
  std::vector<MotionDelta> motion;  // one per node, relative to the node's time-0 pose
  std::vector<AlignedObservation> observations;
};

struct WindowEstimate {
  double timestamp = 0.0;
  std::size_t batchIndex = 0;
  std::size_t windowSize = 0;
  bool fresh = false;  // false when carried forward from an earlier window
  GeometryEstimate geometry;  // poses at the window's first batch, node 0 at the identity
  std::vector<MotionDelta> startMotion;
  std::vector<Pose2> currentPoses;  // poses at the newest batch, same frame as geometry
  int iterations = 0;
  bool converged = false;
  double costBefore = 0.0;  // under the window's prior weights
  double costAfter = 0.0;
  double wallTimeMs = 0.0;
};

/// Calibrates one window of batches (oldest first). Returns nullopt when the
/// window does not meet the calibrate preconditions. `warmStart`, if given,
/// holds every node's pose at the window's first batch.
std::optional<WindowEstimate> calibrate_window(std::span<const ObservationBatch> window, std::size_t numNodes,
                                               const WindowConfig& config, const CalibrationOptions& options,
                                               const std::optional<std::vector<Pose2>>& warmStart = std::nullopt);

/// Single-writer sliding-window state machine. Each push() recalibrates over
/// the trailing window, warm-starting from the previous estimate.
class SlidingCalibrator {
 public:
  SlidingCalibrator(std::size_t numNodes, WindowConfig config, CalibrationOptions options = {});

  /// Returns the estimate after this batch, or nullopt while no window has
  /// ever been solvable.
  std::optional<WindowEstimate> push(ObservationBatch batch);

  const std::optional<WindowEstimate>& latest() const noexcept { return latest_; }
  std::size_t num_nodes() const noexcept { return numNodes_; }

 private:
  std::optional<std::vector<Pose2>> warm_start() const;

  std::size_t numNodes_;
  WindowConfig config_;
  CalibrationOptions options_;
  std::deque<ObservationBatch> window_;
  std::size_t pushed_ = 0;
  std::optional<WindowEstimate> latest_;
};

std::vector<std::optional<WindowEstimate>> sliding_calibrate(std::span<const ObservationBatch> stream,
                                                             std::size_t numNodes, const WindowConfig& config,
                                                             const CalibrationOptions& options = {});

}  // namespace earnet
