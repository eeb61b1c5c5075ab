#include "earnet/conversation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "earnet/error.hpp"

namespace earnet {

namespace {

constexpr double kCoincidentM = 1e-12;

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

std::map<std::size_t, const NodePoseSnapshot*> by_id(std::span<const NodePoseSnapshot> s) {
  std::map<std::size_t, const NodePoseSnapshot*> out;
  for (const auto& n : s) {
    if (!out.emplace(n.nodeId, &n).second) {
      throw Error(ErrorCode::IdMismatch, "duplicate node id " + std::to_string(n.nodeId));
    }
  }
  return out;
}

}  // namespace

std::vector<NodePoseSnapshot> snapshots_from_poses(std::span<const Pose2> poses) {
  std::vector<NodePoseSnapshot> out;
  out.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) out.push_back(NodePoseSnapshot::from_pose(i, poses[i]));
  return out;
}

bool interest(const NodePoseSnapshot& i, const NodePoseSnapshot& j) {
  const Vec2 d = j.position - i.position;
  if (norm(d) < kCoincidentM) {
    throw Error(ErrorCode::CoincidentPositions,
                "nodes " + std::to_string(i.nodeId) + " and " + std::to_string(j.nodeId) + " share a position");
  }
  const double bearing = std::atan2(d.y, d.x);
  return std::abs(wrap_angle(bearing - i.orientation)) < kInterestHalfAngle;
}

ConversationGraph build_graph(std::span<const NodePoseSnapshot> snapshots) {
  by_id(snapshots);  // rejects duplicate ids
  const std::size_t n = snapshots.size();
  std::vector<std::vector<bool>> wants(n, std::vector<bool>(n, false));
  ConversationGraph g;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      wants[a][b] = interest(snapshots[a], snapshots[b]);
      if (wants[a][b]) g.interestEdges.emplace_back(snapshots[a].nodeId, snapshots[b].nodeId);
    }
  }

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!(wants[a][b] && wants[b][a])) continue;
      g.mutualEdges.emplace_back(std::min(snapshots[a].nodeId, snapshots[b].nodeId),
                                 std::max(snapshots[a].nodeId, snapshots[b].nodeId));
      parent[find_root(parent, a)] = find_root(parent, b);
    }
  }
  std::sort(g.interestEdges.begin(), g.interestEdges.end());
  std::sort(g.mutualEdges.begin(), g.mutualEdges.end());

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t a = 0; a < n; ++a) components[find_root(parent, a)].push_back(snapshots[a].nodeId);
  for (auto& [root, ids] : components) {
    std::sort(ids.begin(), ids.end());
    g.groups.push_back(std::move(ids));
  }
  std::sort(g.groups.begin(), g.groups.end());
  return g;
}

double setup_accuracy(std::span<const NodePoseSnapshot> estimated, std::span<const NodePoseSnapshot> truth) {
  const auto est = by_id(estimated);
  const auto tru = by_id(truth);
  for (const auto& [id, s] : est) {
    if (!tru.contains(id)) throw Error(ErrorCode::IdMismatch, "estimate for unknown node " + std::to_string(id));
  }
  std::size_t pairs = 0, agree = 0;
  for (const auto& [i, ti] : tru) {
    for (const auto& [j, tj] : tru) {
      if (i == j) continue;
      ++pairs;
      const bool expected = interest(*ti, *tj);
      const auto ei = est.find(i), ej = est.find(j);
      const bool predicted = ei != est.end() && ej != est.end() && interest(*ei->second, *ej->second);
      if (expected == predicted) ++agree;
    }
  }
  return pairs == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(pairs);
}

GroupingMetrics evaluate(std::span<const NodePoseSnapshot> estimated, std::span<const NodePoseSnapshot> truth) {
  if (estimated.size() != truth.size()) {
    throw Error(ErrorCode::IdMismatch, "estimated and true snapshot counts differ");
  }
  const auto tru = by_id(truth);
  GroupingMetrics m;
  m.setupAccuracy = setup_accuracy(estimated, truth);
  if (estimated.empty()) return m;
  double orient = 0.0, pos = 0.0;
  for (const auto& e : estimated) {
    const auto& t = *tru.at(e.nodeId);
    orient += std::abs(wrap_angle(e.orientation - t.orientation));
    pos += norm(e.position - t.position);
  }
  const double n = static_cast<double>(estimated.size());
  m.orientationErrorDeg = orient / n * 180.0 / std::numbers::pi;
  m.positionErrorM = pos / n;
  return m;
}

}  // namespace earnet
