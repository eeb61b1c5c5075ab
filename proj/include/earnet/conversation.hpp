#pragma once

// Conversation groups from node poses (mutual-interest rule) and the
// grouping evaluation metrics.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "earnet/geometry.hpp"

namespace earnet {

/// Half-width of the cone in which a listener counts as facing someone.
inline constexpr double kInterestHalfAngle = std::numbers::pi / 4.0;

struct NodePoseSnapshot {
  std::size_t nodeId = 0;
  Vec2 position;
  double orientation = 0.0;  // radians, wrapped

  static NodePoseSnapshot from_pose(std::size_t id, const Pose2& pose) {
    return {id, pose.translation, pose.rotation.angle()};
  }
};

std::vector<NodePoseSnapshot> snapshots_from_poses(std::span<const Pose2> poses);

using Edge = std::pair<std::size_t, std::size_t>;  // node ids

struct ConversationGraph {
  std::vector<Edge> interestEdges;  // directed, i -> j
  std::vector<Edge> mutualEdges;    // first < second
  std::vector<std::vector<std::size_t>> groups;  // ids sorted; groups ordered by first member
};

/// True iff j lies strictly within the interest cone of i.
bool interest(const NodePoseSnapshot& i, const NodePoseSnapshot& j);

ConversationGraph build_graph(std::span<const NodePoseSnapshot> snapshots);

struct GroupingMetrics {
  double setupAccuracy = 0.0;
  double orientationErrorDeg = 0.0;
  double positionErrorM = 0.0;
};

/// Estimated snapshots must already be gauge-aligned to the truth. Nodes are
/// matched by id; a missing estimate counts as predicting no interest.
GroupingMetrics evaluate(std::span<const NodePoseSnapshot> estimated, std::span<const NodePoseSnapshot> truth);

/// Fraction of ordered pairs whose interest verdict agrees with the truth.
double setup_accuracy(std::span<const NodePoseSnapshot> estimated, std::span<const NodePoseSnapshot> truth);

}  // namespace earnet
