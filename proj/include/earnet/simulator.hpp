#pragma once

// Deterministic conversation-scene simulator. Stands in for the acoustic
// front end by emitting noisy DoA, level and embedding observations.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earnet/alignment.hpp"
#include "earnet/conversation.hpp"
#include "earnet/geometry.hpp"
#include "earnet/observation.hpp"

namespace earnet {

struct NoiseModel {
  double doaSigmaDeg = 0.0;
  double distanceSigmaRel = 0.0;  // multiplicative, folded into the level
  double embeddingSigma = 0.0;    // per component, before renormalization
  double missProb = 0.0;
  double imuDriftRadPerS = 0.0;
  double imuDriftMPerS = 0.0;

  void validate() const;
};

enum class RoomClass { Small, Medium, Large };

std::optional<RoomClass> parse_room_class(const std::string& name);
std::string to_string(RoomClass c);

/// Side-length range of a square room of the given class, meters.
std::pair<double, double> room_side_range(RoomClass c);

struct SimulationConfig {
  // Either an explicit size or a class; a class draws a square side from its
  // range using the seed.
  double roomWidth = 0.0;
  double roomHeight = 0.0;
  std::optional<RoomClass> roomClass;

  std::size_t numNodes = 4;
  std::size_t groupSize = 2;
  double conversationRadiusM = 0.6;
  double speed = 0.0;  // m/s, group walking speed
  double durationS = 60.0;
  double frameS = 0.1;
  std::size_t maxSimultaneous = 2;
  double overlapProb = 0.1;
  double turnMinS = 1.0;
  double turnMaxS = 3.0;
  double gapMaxS = 0.5;
  std::size_t embeddingDim = kDefaultEmbeddingDim;
  double txLevelDb = 65.0;
  NoiseModel noise;
  std::uint64_t seed = 1;

  void validate() const;  // throws InvalidConfig naming the field
};

struct Scenario {
  SimulationConfig config;
  double roomWidth = 0.0;
  double roomHeight = 0.0;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::vector<Pose2>> poses;      // [frame][node]
  std::vector<std::vector<Interval>> speech;  // [node], half-open, sorted
  std::vector<Embedding> embeddings;          // true (enrolled) voice per node
  std::vector<double> txLevelDb;              // per node, shared over the network

  std::size_t num_frames() const noexcept { return poses.size(); }
  std::size_t num_nodes() const noexcept { return embeddings.size(); }
  double frame_time(std::size_t frame) const noexcept { return static_cast<double>(frame) * config.frameS; }
  std::vector<std::size_t> active_speakers(std::size_t frame) const;
};

Scenario generate_scenario(const SimulationConfig& config);
Scenario generate_scenario(SimulationConfig config, std::uint64_t seed);

struct FrameTruth {
  double time = 0.0;
  std::vector<NodePoseSnapshot> snapshots;
  std::vector<std::size_t> activeSpeakers;
  std::vector<Vec2> sourcePositions;  // parallel to activeSpeakers
};

std::vector<FrameTruth> ground_truth(const Scenario& scenario);
FrameTruth frame_truth(const Scenario& scenario, std::size_t frame);

/// IMU reading of `node` at `frame`: the true delta since frame 0 plus the
/// accumulated drift.
MotionDelta imu_delta(const Scenario& scenario, std::size_t node, std::size_t frame);

/// Every listening node's observation of every other active speaker.
std::vector<MobileObservation> observe(const Scenario& scenario, std::size_t frame);

struct TrackMatch {
  std::vector<std::size_t> assignment;  // estimate i -> truth assignment[i]
  double cost = 0.0;                    // summed squared error
  bool exhaustive = true;               // false when the greedy fallback ran
};

inline constexpr std::size_t kMaxExhaustiveTracks = 6;

/// Minimum-cost permutation, lexicographically smallest among ties. Throws
/// SizeLimitExceeded above kMaxExhaustiveTracks unless `allowGreedy`.
TrackMatch match_tracks(std::span<const Vec2> estimates, std::span<const Vec2> truths, bool allowGreedy = false);

}  // namespace earnet
