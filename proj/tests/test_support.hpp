#pragma once

// Shared generators and brute-force oracles for the unit and acceptance suites.
// Nothing here calls into the calibration path it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <numbers>
#include <random>
#include <vector>

#include "earnet/audio_control.hpp"
#include "earnet/geometry.hpp"
#include "earnet/mobile.hpp"

namespace earnet::testing {

inline constexpr double kPi = std::numbers::pi;

class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct SyntheticScene {
  std::vector<Pose2> poses;
  std::vector<Vec2> sources;
  std::vector<SourceObservation> observations;
};

struct SceneOptions {
  double roomSize = 10.0;
  double pointSigma = 0.0;  // isotropic Gaussian noise on local points
};

/// Random node poses and sources; every node observes every source.
inline SyntheticScene make_scene(TestRng& rng, std::size_t numNodes, std::size_t numSources,
                                 const SceneOptions& opt = {}) {
  SyntheticScene s;
  for (std::size_t l = 0; l < numNodes; ++l) {
    s.poses.push_back({Rotation2(rng.uniform(-kPi, kPi)),
                       {rng.uniform(0.0, opt.roomSize), rng.uniform(0.0, opt.roomSize)}});
  }
  for (std::size_t k = 0; k < numSources; ++k) {
    s.sources.push_back({rng.uniform(0.0, opt.roomSize), rng.uniform(0.0, opt.roomSize)});
  }
  for (std::size_t l = 0; l < numNodes; ++l) {
    const Pose2 inv = s.poses[l].inverse();
    for (std::size_t k = 0; k < numSources; ++k) {
      Vec2 local = inv.apply(s.sources[k]);
      if (opt.pointSigma > 0.0) local += Vec2{rng.normal(opt.pointSigma), rng.normal(opt.pointSigma)};
      s.observations.push_back({l, k, local, 1.0});
    }
  }
  return s;
}

/// Uses a direct angle fit as the aligning transform: independent of match_datasets.
struct AlignmentErrors {
  double maxPosition = 0.0;
  double maxOrientation = 0.0;
};

inline Pose2 closed_form_rigid_fit(const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
  Vec2 cf, ct;
  for (std::size_t i = 0; i < from.size(); ++i) {
    cf += from[i];
    ct += to[i];
  }
  cf *= 1.0 / from.size();
  ct *= 1.0 / to.size();
  double sdot = 0.0, scross = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const Vec2 a = from[i] - cf;
    const Vec2 b = to[i] - ct;
    sdot += dot(a, b);
    scross += cross(a, b);
  }
  const Rotation2 r(std::atan2(scross, sdot));
  return {r, ct - r.apply(cf)};
}

inline AlignmentErrors pose_errors_after_alignment(const std::vector<Pose2>& estimated,
                                                   const std::vector<Pose2>& truth) {
  std::vector<Vec2> from, to;
  for (const auto& p : estimated) from.push_back(p.translation);
  for (const auto& p : truth) to.push_back(p.translation);
  const Pose2 t = closed_form_rigid_fit(from, to);
  AlignmentErrors e;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const Pose2 aligned = t.compose(estimated[i]);
    e.maxPosition = std::max(e.maxPosition, norm(aligned.translation - truth[i].translation));
    e.maxOrientation = std::max(
        e.maxOrientation, std::abs(wrap_angle(aligned.rotation.angle() - truth[i].rotation.angle())));
  }
  return e;
}

/// Unit-weight cost of a two-node problem with node 0 at the identity and
/// node 1 at (theta, n), sources at their optimal midpoints.
inline double two_node_cost(const std::vector<Vec2>& local0, const std::vector<Vec2>& local1, double theta,
                            const Vec2& n) {
  const double c = std::cos(theta), s = std::sin(theta);
  double total = 0.0;
  for (std::size_t k = 0; k < local0.size(); ++k) {
    const Vec2 p1{c * local1[k].x - s * local1[k].y + n.x, s * local1[k].x + c * local1[k].y + n.y};
    const Vec2 diff = p1 - local0[k];
    total += 0.5 * squared_norm(diff);  // two residuals of half the gap each
  }
  return total;
}

/// Exact minimum of two_node_cost over the grid theta in [-pi, pi) and n in
/// (step Z)^2. For a fixed theta the cost is an isotropic quadratic in n, so
/// the best grid point in n is the one nearest the continuous minimizer.
inline double two_node_grid_minimum(const std::vector<Vec2>& local0, const std::vector<Vec2>& local1,
                                    double step) {
  double best = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<long>(std::ceil(2.0 * kPi / step));
  for (long i = 0; i < steps; ++i) {
    const double theta = -kPi + step * static_cast<double>(i);
    const double c = std::cos(theta), s = std::sin(theta);
    Vec2 nstar;
    for (std::size_t k = 0; k < local0.size(); ++k) {
      nstar += local0[k] - Vec2{c * local1[k].x - s * local1[k].y, s * local1[k].x + c * local1[k].y};
    }
    nstar *= 1.0 / local0.size();
    const Vec2 ngrid{std::round(nstar.x / step) * step, std::round(nstar.y / step) * step};
    best = std::min(best, two_node_cost(local0, local1, theta, ngrid));
  }
  return best;
}

struct StreamOptions {
  std::size_t numNodes = 4;
  std::size_t numBatches = 20;
  std::size_t sourcesPerBatch = 2;
  double dt = 1.0;
  double speed = 0.0;     // m/s, constant per node in a random heading
  double turnRate = 0.0;  // rad/s, constant per node
  double roomSize = 10.0;
  double doaSigma = 0.0;  // radians
  double distanceSigmaRel = 0.0;
};

struct SyntheticStream {
  std::vector<std::vector<Pose2>> truth;  // [batch][node]
  std::vector<ObservationBatch> batches;
};

/// Nodes on straight constant-speed, constant-turn-rate tracks; each batch has
/// fresh random sources seen by every node. Motion deltas are exact.
inline SyntheticStream make_stream(TestRng& rng, const StreamOptions& opt) {
  SyntheticStream s;
  std::vector<Pose2> start;
  std::vector<Vec2> velocity;
  std::vector<double> omega;
  for (std::size_t l = 0; l < opt.numNodes; ++l) {
    start.push_back({Rotation2(rng.uniform(-kPi, kPi)),
                     {rng.uniform(0.0, opt.roomSize), rng.uniform(0.0, opt.roomSize)}});
    const double heading = rng.uniform(-kPi, kPi);
    velocity.push_back({opt.speed * std::cos(heading), opt.speed * std::sin(heading)});
    omega.push_back(rng.chance(0.5) ? opt.turnRate : -opt.turnRate);
  }
  for (std::size_t b = 0; b < opt.numBatches; ++b) {
    const double t = opt.dt * static_cast<double>(b);
    std::vector<Pose2> poses;
    ObservationBatch batch;
    batch.timestamp = t;
    for (std::size_t l = 0; l < opt.numNodes; ++l) {
      const Pose2 p{Rotation2(start[l].rotation.angle() + omega[l] * t), start[l].translation + velocity[l] * t};
      poses.push_back(p);
      batch.motion.push_back(MotionDelta::from_pose(start[l].inverse().compose(p)));
    }
    for (std::size_t k = 0; k < opt.sourcesPerBatch; ++k) {
      const Vec2 src{rng.uniform(0.0, opt.roomSize), rng.uniform(0.0, opt.roomSize)};
      for (std::size_t l = 0; l < opt.numNodes; ++l) {
        const Vec2 local = poses[l].inverse().apply(src);
        PolarObservation o{std::atan2(local.y, local.x), norm(local), 1.0};
        if (opt.doaSigma > 0.0) o.azimuth = wrap_angle(o.azimuth + rng.normal(opt.doaSigma));
        if (opt.distanceSigmaRel > 0.0) o.distance *= std::max(0.05, 1.0 + rng.normal(opt.distanceSigmaRel));
        batch.observations.push_back({l, k, o});
      }
    }
    s.truth.push_back(std::move(poses));
    s.batches.push_back(std::move(batch));
  }
  return s;
}

// Independent oracle: count through all 6^n level vectors; ties resolved by
// comparing level vectors in ascending id order, higher first.
inline std::vector<int> brute_force_allocation(const std::vector<StreamDescriptor>& s, int budget) {
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a].streamId < s[b].streamId; });
  std::vector<int> best(n, 0);
  double bestU = -1.0;
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= kBandwidthLevels.size();
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<int> lv(n);
    std::size_t c = code;
    int sum = 0;
    double u = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lv[i] = kBandwidthLevels[c % kBandwidthLevels.size()];
      c /= kBandwidthLevels.size();
      sum += lv[i];
      u += lv[i] / s[i].distanceM;
    }
    if (sum > budget) continue;
    bool better = u > bestU + 1e-12 * std::max(1.0, bestU);
    if (!better && std::abs(u - bestU) <= 1e-12 * std::max(1.0, bestU)) {
      for (auto i : order) {
        if (lv[i] != best[i]) {
          better = lv[i] > best[i];
          break;
        }
      }
    }
    if (better) {
      bestU = u;
      best = lv;
    }
  }
  return best;
}

}  // namespace earnet::testing
