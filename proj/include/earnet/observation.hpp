#pragma once

#include <cstddef>

#include "earnet/embedding.hpp"
#include "earnet/geometry.hpp"

namespace earnet {

/// Pose of a node at time k relative to its pose at time 0, expressed in the
/// node's time-0 frame: pose_k = pose_0 * delta_k.
struct MotionDelta {
  Rotation2 rotation;
  Vec2 translation;

  static MotionDelta identity() noexcept { return {}; }
  static MotionDelta from_pose(const Pose2& p) noexcept { return {p.rotation, p.translation}; }
  Pose2 as_pose() const noexcept { return {rotation, translation}; }
};

/// One node's view of one source at one time step, as produced by the
/// node-discovery front end plus the IMU.
struct MobileObservation {
  std::size_t nodeId = 0;
  std::size_t timeIndex = 0;
  PolarObservation obs;  // distance is 0 until estimated from sound levels
  MotionDelta motion;
  double timestamp = 0.0;
  Embedding embedding;
  double soundLevel = 0.0;  // dB
};

}  // namespace earnet
