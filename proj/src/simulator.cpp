#include "earnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "earnet/error.hpp"
#include "earnet/rng.hpp"

namespace earnet {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kWallMarginM = 0.5;

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, field + ": " + what);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

bool contains(const Interval& iv, double t) { return iv.start <= t && t < iv.end; }

struct Turn {
  double start;
  double end;
  std::size_t speaker;
};

std::vector<Turn> make_schedule(const SimulationConfig& c, std::uint64_t seed) {
  Rng rng(seed, Stream::Schedule);
  std::vector<Turn> turns;
  double t = rng.uniform(0.0, c.gapMaxS);
  std::size_t prev = c.numNodes;
  while (t < c.durationS) {
    const double len = rng.uniform(c.turnMinS, c.turnMaxS);
    std::vector<std::size_t> candidates;
    for (std::size_t s = 0; s < c.numNodes; ++s) {
      const bool busy = std::any_of(turns.begin(), turns.end(),
                                    [&](const Turn& u) { return u.speaker == s && u.start <= t && t < u.end; });
      if (s != prev && !busy) candidates.push_back(s);
    }
    if (candidates.empty()) break;  // unreachable with two or more nodes
    const std::size_t speaker = candidates[rng.below(candidates.size())];
    const Turn turn{t, std::min(t + len, c.durationS), speaker};
    turns.push_back(turn);
    prev = speaker;

    double next;
    if (c.maxSimultaneous >= 2 && rng.chance(c.overlapProb)) {
      next = turn.end - rng.uniform(0.0, 0.5 * (turn.end - turn.start));
    } else {
      next = turn.end + rng.uniform(0.0, c.gapMaxS);
    }
    // Delay the start until fewer than M turns are active; no later start
    // exists yet, so the count can only fall after `next`.
    for (;;) {
      std::size_t active = 0;
      double firstEnd = std::numeric_limits<double>::infinity();
      for (const auto& u : turns) {
        if (u.start <= next && next < u.end) {
          ++active;
          firstEnd = std::min(firstEnd, u.end);
        }
      }
      if (active < c.maxSimultaneous) break;
      next = firstEnd;
    }
    t = next;
  }
  return turns;
}

Vec2 centroid_of_others(const std::vector<std::size_t>& group, std::size_t self, const std::vector<Vec2>& pos) {
  Vec2 c;
  std::size_t n = 0;
  for (auto m : group) {
    if (m == self) continue;
    c += pos[m];
    ++n;
  }
  return c * (1.0 / static_cast<double>(n));
}

double heading_to(const Vec2& from, const Vec2& to) { return std::atan2(to.y - from.y, to.x - from.x); }

}  // namespace

void NoiseModel::validate() const {
  require(finite_nonneg(doaSigmaDeg), "noise.doaSigmaDeg", "must be finite and nonnegative");
  require(finite_nonneg(distanceSigmaRel), "noise.distanceSigmaRel", "must be finite and nonnegative");
  require(finite_nonneg(embeddingSigma), "noise.embeddingSigma", "must be finite and nonnegative");
  require(finite_nonneg(missProb) && missProb <= 1.0, "noise.missProb", "must lie in [0, 1]");
  require(finite_nonneg(imuDriftRadPerS), "noise.imuDriftRadPerS", "must be finite and nonnegative");
  require(finite_nonneg(imuDriftMPerS), "noise.imuDriftMPerS", "must be finite and nonnegative");
}

std::optional<RoomClass> parse_room_class(const std::string& name) {
  if (name == "small") return RoomClass::Small;
  if (name == "medium") return RoomClass::Medium;
  if (name == "large") return RoomClass::Large;
  return std::nullopt;
}

std::string to_string(RoomClass c) {
  switch (c) {
    case RoomClass::Small: return "small";
    case RoomClass::Medium: return "medium";
    case RoomClass::Large: return "large";
  }
  return "unknown";
}

std::pair<double, double> room_side_range(RoomClass c) {
  switch (c) {
    case RoomClass::Small: return {5.0, 10.0};
    case RoomClass::Medium: return {10.0, 15.0};
    case RoomClass::Large: return {15.0, 20.0};
  }
  return {0.0, 0.0};
}

void SimulationConfig::validate() const {
  if (!roomClass) {
    require(std::isfinite(roomWidth) && roomWidth > 0.0, "roomSize", "width must be positive");
    require(std::isfinite(roomHeight) && roomHeight > 0.0, "roomSize", "height must be positive");
    const double need = 2.0 * (conversationRadiusM + kWallMarginM);
    require(std::min(roomWidth, roomHeight) > need, "roomSize",
            "room must exceed " + std::to_string(need) + " m per side");
  }
  require(numNodes >= 2, "numNodes", "need at least two nodes");
  require(groupSize >= 1 && groupSize <= numNodes, "groupSize", "must lie in [1, numNodes]");
  require(std::isfinite(conversationRadiusM) && conversationRadiusM > 0.0 && conversationRadiusM < 2.0,
          "conversationRadiusM", "must lie in (0, 2)");
  require(finite_nonneg(speed), "speed", "must be finite and nonnegative");
  require(std::isfinite(durationS) && durationS > 0.0, "durationS", "must be positive");
  require(std::isfinite(frameS) && frameS > 0.0, "frameS", "must be positive");
  require(durationS / frameS <= 1e7, "frameS", "too many frames");
  require(maxSimultaneous >= 1, "maxSimultaneous", "must be at least 1");
  require(finite_nonneg(overlapProb) && overlapProb <= 1.0, "overlapProb", "must lie in [0, 1]");
  require(std::isfinite(turnMinS) && turnMinS > 0.0, "turnS", "minimum must be positive");
  require(std::isfinite(turnMaxS) && turnMaxS >= turnMinS, "turnS", "maximum must not be below minimum");
  require(finite_nonneg(gapMaxS), "gapMaxS", "must be finite and nonnegative");
  require(embeddingDim >= 1, "embeddingDim", "must be positive");
  require(std::isfinite(txLevelDb), "txLevelDb", "must be finite");
  noise.validate();
}

std::vector<std::size_t> Scenario::active_speakers(std::size_t frame) const {
  const double t = frame_time(frame);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < speech.size(); ++s) {
    if (std::any_of(speech[s].begin(), speech[s].end(), [&](const Interval& iv) { return contains(iv, t); })) {
      out.push_back(s);
    }
  }
  return out;
}

Scenario generate_scenario(SimulationConfig config, std::uint64_t seed) {
  config.seed = seed;
  return generate_scenario(config);
}

Scenario generate_scenario(const SimulationConfig& config) {
  config.validate();
  const std::uint64_t seed = config.seed;
  Scenario sc;
  sc.config = config;
  if (config.roomClass) {
    const auto [lo, hi] = room_side_range(*config.roomClass);
    Rng rng(seed, Stream::Room);
    sc.roomWidth = sc.roomHeight = rng.uniform(lo, hi);
  } else {
    sc.roomWidth = config.roomWidth;
    sc.roomHeight = config.roomHeight;
  }

  const std::size_t L = config.numNodes;
  for (std::size_t first = 0; first < L; first += config.groupSize) {
    std::vector<std::size_t> g;
    for (std::size_t i = first; i < std::min(L, first + config.groupSize); ++i) g.push_back(i);
    sc.groups.push_back(std::move(g));
  }

  for (std::size_t i = 0; i < L; ++i) {
    Rng rng(seed, Stream::Embedding, {i});
    std::vector<double> v(config.embeddingDim);
    for (double& x : v) x = rng.normal();
    sc.embeddings.push_back(Embedding::normalized(std::move(v)));
    sc.txLevelDb.push_back(config.txLevelDb);
  }

  const auto turns = make_schedule(config, seed);
  sc.speech.assign(L, {});
  for (const auto& t : turns) {
    if (t.end > t.start) sc.speech[t.speaker].push_back({t.start, t.end});
  }

  // Group centers walk between random waypoints, keeping every member inside
  // the room.
  const double margin = config.conversationRadiusM + kWallMarginM;
  const auto numFrames = static_cast<std::size_t>(std::llround(config.durationS / config.frameS));
  const std::size_t G = sc.groups.size();
  std::vector<Vec2> center(G), waypoint(G);
  std::vector<double> phase(G), staticHeading(L);
  std::vector<Rng> walk;
  const double spacing = 2.0 * config.conversationRadiusM + kWallMarginM;
  for (std::size_t g = 0; g < G; ++g) {
    walk.emplace_back(seed, Stream::Trajectory, std::initializer_list<std::uint64_t>{g});
    auto& rng = walk.back();
    // Start groups apart when the room allows it.
    for (int attempt = 0; attempt < 100; ++attempt) {
      center[g] = {rng.uniform(margin, sc.roomWidth - margin), rng.uniform(margin, sc.roomHeight - margin)};
      bool clear = true;
      for (std::size_t h = 0; h < g; ++h) clear = clear && norm(center[g] - center[h]) >= spacing;
      if (clear) break;
    }
    waypoint[g] = {rng.uniform(margin, sc.roomWidth - margin), rng.uniform(margin, sc.roomHeight - margin)};
    phase[g] = rng.uniform(-kPi, kPi);
  }
  for (std::size_t i = 0; i < L; ++i) staticHeading[i] = Rng(seed, Stream::Heading, {i}).uniform(-kPi, kPi);

  sc.poses.reserve(numFrames);
  std::vector<Vec2> velocity(G);
  std::vector<std::size_t> groupOf(L), slot(L);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t k = 0; k < sc.groups[g].size(); ++k) {
      groupOf[sc.groups[g][k]] = g;
      slot[sc.groups[g][k]] = k;
    }
  }

  for (std::size_t f = 0; f < numFrames; ++f) {
    const double t = sc.frame_time(f);
    if (f > 0 && config.speed > 0.0) {
      const double step = config.speed * config.frameS;
      for (std::size_t g = 0; g < G; ++g) {
        Vec2 to = waypoint[g] - center[g];
        double left = step;
        // A leg may end mid-step; continue toward the next waypoint.
        while (norm(to) <= left) {
          left -= norm(to);
          center[g] = waypoint[g];
          waypoint[g] = {walk[g].uniform(margin, sc.roomWidth - margin),
                         walk[g].uniform(margin, sc.roomHeight - margin)};
          to = waypoint[g] - center[g];
        }
        const Vec2 dir = to * (1.0 / norm(to));
        center[g] += dir * left;
        velocity[g] = dir * config.speed;
      }
    }

    std::vector<Vec2> pos(L);
    for (std::size_t i = 0; i < L; ++i) {
      const auto g = groupOf[i];
      const auto n = sc.groups[g].size();
      if (n == 1) {
        pos[i] = center[g];
      } else {
        const double a = phase[g] + 2.0 * kPi * static_cast<double>(slot[i]) / static_cast<double>(n);
        pos[i] = center[g] + Vec2{std::cos(a), std::sin(a)} * config.conversationRadiusM;
      }
    }

    // Current speaker of each group: the active member whose turn began last.
    std::vector<std::optional<std::size_t>> current(G);
    std::vector<double> began(G, -1.0);
    for (std::size_t s = 0; s < L; ++s) {
      for (const auto& iv : sc.speech[s]) {
        if (!contains(iv, t)) continue;
        const auto g = groupOf[s];
        if (iv.start > began[g]) {
          began[g] = iv.start;
          current[g] = s;
        }
      }
    }

    std::vector<Pose2> poses(L);
    for (std::size_t i = 0; i < L; ++i) {
      const auto g = groupOf[i];
      const bool alone = sc.groups[g].size() == 1;
      const bool moving = config.speed > 0.0;
      double heading;
      if (!alone && current[g] && *current[g] == i) {
        heading = heading_to(pos[i], centroid_of_others(sc.groups[g], i, pos));
      } else if (current[g] && *current[g] != i) {
        heading = heading_to(pos[i], pos[*current[g]]);
      } else if (moving) {
        heading = std::atan2(velocity[g].y, velocity[g].x);
      } else if (!alone) {
        heading = heading_to(pos[i], centroid_of_others(sc.groups[g], i, pos));
      } else {
        heading = staticHeading[i];
      }
      poses[i] = {Rotation2(heading), pos[i]};
    }
    sc.poses.push_back(std::move(poses));
  }
  return sc;
}

FrameTruth frame_truth(const Scenario& sc, std::size_t frame) {
  if (frame >= sc.num_frames()) throw Error(ErrorCode::InvalidArgument, "frame outside the scenario");
  FrameTruth ft;
  ft.time = sc.frame_time(frame);
  ft.snapshots = snapshots_from_poses(sc.poses[frame]);
  ft.activeSpeakers = sc.active_speakers(frame);
  for (auto s : ft.activeSpeakers) ft.sourcePositions.push_back(sc.poses[frame][s].translation);
  return ft;
}

std::vector<FrameTruth> ground_truth(const Scenario& sc) {
  std::vector<FrameTruth> out;
  out.reserve(sc.num_frames());
  for (std::size_t f = 0; f < sc.num_frames(); ++f) out.push_back(frame_truth(sc, f));
  return out;
}

MotionDelta imu_delta(const Scenario& sc, std::size_t node, std::size_t frame) {
  if (frame >= sc.num_frames() || node >= sc.num_nodes()) {
    throw Error(ErrorCode::InvalidArgument, "frame or node outside the scenario");
  }
  const Pose2 truth = sc.poses[0][node].inverse().compose(sc.poses[frame][node]);
  const auto& n = sc.config.noise;
  if (n.imuDriftRadPerS == 0.0 && n.imuDriftMPerS == 0.0) return MotionDelta::from_pose(truth);

  Rng rng(sc.config.seed, Stream::Drift, {node});
  const double sign = rng.chance(0.5) ? 1.0 : -1.0;
  const double dir = rng.uniform(-kPi, kPi);
  const double t = sc.frame_time(frame);
  return {Rotation2(truth.rotation.angle() + sign * n.imuDriftRadPerS * t),
          truth.translation + Vec2{std::cos(dir), std::sin(dir)} * (n.imuDriftMPerS * t)};
}

std::vector<MobileObservation> observe(const Scenario& sc, std::size_t frame) {
  if (frame >= sc.num_frames()) throw Error(ErrorCode::InvalidArgument, "frame outside the scenario");
  const auto& noise = sc.config.noise;
  const auto active = sc.active_speakers(frame);
  const auto& poses = sc.poses[frame];
  std::vector<MobileObservation> out;
  for (std::size_t l = 0; l < sc.num_nodes(); ++l) {
    for (auto s : active) {
      if (s == l) continue;  // own voice is recognized and skipped
      Rng rng(sc.config.seed, Stream::Observation, {frame, l, s});
      if (rng.chance(noise.missProb)) continue;

      const Vec2 local = poses[l].inverse().apply(poses[s].translation);
      MobileObservation o;
      o.nodeId = l;
      o.timeIndex = frame;
      o.timestamp = sc.frame_time(frame);
      o.obs.azimuth = std::atan2(local.y, local.x);
      if (noise.doaSigmaDeg > 0.0) o.obs.azimuth = wrap_angle(o.obs.azimuth + rng.normal(noise.doaSigmaDeg * kPi / 180.0));
      o.obs.distance = 0.0;  // unknown until estimated from levels

      double d = norm(local);
      if (noise.distanceSigmaRel > 0.0) d *= std::max(0.05, 1.0 + rng.normal(noise.distanceSigmaRel));
      o.soundLevel = received_level(sc.txLevelDb[s], d);

      if (noise.embeddingSigma > 0.0) {
        std::vector<double> e = sc.embeddings[s].values();
        for (double& x : e) x += rng.normal(noise.embeddingSigma);
        o.embedding = Embedding::normalized(std::move(e));
      } else {
        o.embedding = sc.embeddings[s];
      }
      o.motion = imu_delta(sc, l, frame);
      out.push_back(std::move(o));
    }
  }
  return out;
}

TrackMatch match_tracks(std::span<const Vec2> estimates, std::span<const Vec2> truths, bool allowGreedy) {
  if (estimates.size() != truths.size()) {
    throw Error(ErrorCode::InvalidArgument, "estimate and truth counts differ");
  }
  const std::size_t n = estimates.size();
  auto pair_cost = [&](std::size_t i, std::size_t j) { return squared_norm(estimates[i] - truths[j]); };

  TrackMatch best;
  if (n <= kMaxExhaustiveTracks) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    best.cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += pair_cost(i, perm[i]);
      if (c < best.cost) {  // strict: the earliest permutation wins ties
        best.cost = c;
        best.assignment = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (n == 0) best.cost = 0.0;
    return best;
  }
  if (!allowGreedy) {
    throw Error(ErrorCode::SizeLimitExceeded,
                std::to_string(n) + " tracks exceed the exhaustive limit of " + std::to_string(kMaxExhaustiveTracks));
  }
  // Greedy nearest pairs, lowest indices first among equal costs.
  best.exhaustive = false;
  best.assignment.assign(n, n);
  std::vector<bool> usedTruth(n, false);
  for (std::size_t round = 0; round < n; ++round) {
    double c = std::numeric_limits<double>::infinity();
    std::size_t bi = n, bj = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (best.assignment[i] != n) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (usedTruth[j]) continue;
        if (pair_cost(i, j) < c) {
          c = pair_cost(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    best.assignment[bi] = bj;
    usedTruth[bj] = true;
    best.cost += c;
  }
  return best;
}

}  // namespace earnet
