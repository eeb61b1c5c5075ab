#include "earnet/mobile.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "earnet/error.hpp"

namespace earnet {

Vec2 motion_compensate(const PolarObservation& obs, const MotionDelta& motion) {
  return motion.as_pose().apply(polar_to_local(obs));
}

Vec2 motion_compensate(const MobileObservation& obs) { return motion_compensate(obs.obs, obs.motion); }

MotionDelta rebase(const MotionDelta& start, const MotionDelta& k) {
  return MotionDelta::from_pose(start.as_pose().inverse().compose(k.as_pose()));
}

void WindowConfig::validate() const {
  if (windowLength < 2) throw Error(ErrorCode::InvalidConfig, "windowLength must be at least 2");
  if (!(decayFloor > 0.0) || !std::isfinite(decayFloor)) {
    throw Error(ErrorCode::InvalidConfig, "decayFloor must be positive");
  }
}

std::vector<double> time_decay_weights(std::span<const double> timestamps, double now, const WindowConfig& cfg) {
  std::vector<double> w;
  w.reserve(timestamps.size());
  for (double t : timestamps) {
    if (t > now) throw Error(ErrorCode::InvalidArgument, "timestamp lies after now");
    w.push_back(1.0 / (now - t + cfg.decayFloor));
  }
  return w;
}

namespace {

void check_batch(const ObservationBatch& batch, std::size_t numNodes) {
  if (batch.motion.size() != numNodes) {
    throw Error(ErrorCode::InvalidArgument, "batch carries " + std::to_string(batch.motion.size()) +
                                                " motion deltas for " + std::to_string(numNodes) + " nodes");
  }
  for (const auto& o : batch.observations) {
    if (o.node >= numNodes) throw Error(ErrorCode::InvalidArgument, "observation from an unknown node");
  }
}

// Sources are per-batch events; renumber densely and drop those seen by
// fewer than two nodes.
std::vector<SourceObservation> window_problem(std::span<const ObservationBatch> window, const WindowConfig& cfg) {
  const auto& start = window.front();
  const double now = window.back().timestamp;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<SourceObservation>> bySource;
  for (std::size_t b = 0; b < window.size(); ++b) {
    const auto& batch = window[b];
    const double w = 1.0 / (now - batch.timestamp + cfg.decayFloor);
    for (const auto& o : batch.observations) {
      const MotionDelta d = rebase(start.motion[o.node], batch.motion[o.node]);
      bySource[{b, o.source}].push_back({o.node, 0, motion_compensate(o.obs, d), o.obs.weight * w});
    }
  }
  std::vector<SourceObservation> out;
  std::size_t next = 0;
  for (auto& [key, list] : bySource) {
    if (list.size() < 2) continue;
    for (auto& o : list) {
      o.source = next;
      out.push_back(o);
    }
    ++next;
  }
  return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::optional<WindowEstimate> calibrate_window(std::span<const ObservationBatch> window, std::size_t numNodes,
                                               const WindowConfig& config, const CalibrationOptions& options,
                                               const std::optional<std::vector<Pose2>>& warmStart) {
  config.validate();
  if (window.size() < 2) return std::nullopt;
  for (std::size_t b = 0; b < window.size(); ++b) {
    check_batch(window[b], numNodes);
    if (b > 0 && window[b].timestamp < window[b - 1].timestamp) {
      throw Error(ErrorCode::InvalidArgument, "batch timestamps must be nondecreasing");
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto problem = window_problem(window, config);
  if (problem.empty()) return std::nullopt;

  CalibrationOptions opts = options;
  opts.initialPoses = warmStart;
  CalibrationResult result;
  try {
    result = calibrate(problem, opts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InsufficientObservations || e.code() == ErrorCode::DegenerateConfiguration) {
      return std::nullopt;
    }
    throw;
  }
  if (result.estimate.nodePoses.size() != numNodes) return std::nullopt;  // trailing nodes unobserved

  const auto& newest = window.back();
  WindowEstimate est;
  est.timestamp = newest.timestamp;
  est.batchIndex = window.size() - 1;
  est.windowSize = window.size();
  est.fresh = true;
  est.geometry = std::move(result.estimate);
  est.startMotion = window.front().motion;
  for (std::size_t l = 0; l < numNodes; ++l) {
    est.currentPoses.push_back(
        est.geometry.nodePoses[l].compose(rebase(est.startMotion[l], newest.motion[l]).as_pose()));
  }
  est.iterations = result.iterations;
  est.converged = result.converged;
  est.costBefore = result.initialPriorCost;
  est.costAfter = result.finalPriorCost;
  est.wallTimeMs = elapsed_ms(t0);
  return est;
}

SlidingCalibrator::SlidingCalibrator(std::size_t numNodes, WindowConfig config, CalibrationOptions options)
    : numNodes_(numNodes), config_(config), options_(std::move(options)) {
  config_.validate();
  if (numNodes_ < 2) throw Error(ErrorCode::InvalidConfig, "need at least two nodes");
}

std::optional<std::vector<Pose2>> SlidingCalibrator::warm_start() const {
  if (!latest_) return std::nullopt;
  const auto& startMotion = window_.front().motion;
  std::vector<Pose2> poses;
  poses.reserve(numNodes_);
  for (std::size_t l = 0; l < numNodes_; ++l) {
    poses.push_back(
        latest_->geometry.nodePoses[l].compose(rebase(latest_->startMotion[l], startMotion[l]).as_pose()));
  }
  return poses;
}

std::optional<WindowEstimate> SlidingCalibrator::push(ObservationBatch batch) {
  check_batch(batch, numNodes_);
  if (!window_.empty() && batch.timestamp < window_.back().timestamp) {
    throw Error(ErrorCode::InvalidArgument, "batch timestamps must be nondecreasing");
  }
  const auto t0 = std::chrono::steady_clock::now();
  window_.push_back(std::move(batch));
  if (window_.size() > config_.windowLength) window_.pop_front();
  const std::size_t index = pushed_++;

  const std::vector<ObservationBatch> window(window_.begin(), window_.end());
  auto est = calibrate_window(window, numNodes_, config_, options_, warm_start());
  if (est) {
    est->batchIndex = index;
    latest_ = std::move(est);
    return latest_;
  }
  if (!latest_) return std::nullopt;

  // Carry the previous start poses forward, dead-reckoning to the newest batch.
  const auto& newest = window_.back();
  WindowEstimate& carried = *latest_;
  carried.timestamp = newest.timestamp;
  carried.batchIndex = index;
  carried.windowSize = window_.size();
  carried.fresh = false;
  for (std::size_t l = 0; l < numNodes_; ++l) {
    carried.currentPoses[l] =
        carried.geometry.nodePoses[l].compose(rebase(carried.startMotion[l], newest.motion[l]).as_pose());
  }
  carried.iterations = 0;
  carried.converged = false;
  carried.wallTimeMs = elapsed_ms(t0);
  return latest_;
}

std::vector<std::optional<WindowEstimate>> sliding_calibrate(std::span<const ObservationBatch> stream,
                                                             std::size_t numNodes, const WindowConfig& config,
                                                             const CalibrationOptions& options) {
  SlidingCalibrator cal(numNodes, config, options);
  std::vector<std::optional<WindowEstimate>> out;
  out.reserve(stream.size());
  for (const auto& b : stream) out.push_back(cal.push(b));
  return out;
}

}  // namespace earnet
