#include "earnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "earnet/error.hpp"

namespace earnet {

void PipelineOptions::validate() const {
  if (!(batchIntervalS > 0.0) || !std::isfinite(batchIntervalS)) {
    throw Error(ErrorCode::InvalidConfig, "batchIntervalS must be positive");
  }
  window.validate();
  if (!(alignment.threshold > -1.0 && alignment.threshold < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "alignment threshold must lie in (-1, 1)");
  }
}

std::vector<std::size_t> select_batch_frames(const Scenario& scenario, double batchIntervalS) {
  if (!(batchIntervalS > 0.0)) throw Error(ErrorCode::InvalidArgument, "batch interval must be positive");
  std::vector<std::size_t> frames;
  long lastSlot = -1;
  for (std::size_t f = 0; f < scenario.num_frames(); ++f) {
    const auto slot = static_cast<long>(std::floor(scenario.frame_time(f) / batchIntervalS + 1e-9));
    if (slot == lastSlot) continue;
    if (scenario.active_speakers(f).size() != 1) continue;
    frames.push_back(f);
    lastSlot = slot;
  }
  return frames;
}

PipelineBatch build_batch(const Scenario& scenario, std::size_t frame, const AlignmentOptions& alignment) {
  PipelineBatch out;
  out.frame = frame;
  out.batch.timestamp = scenario.frame_time(frame);
  for (std::size_t l = 0; l < scenario.num_nodes(); ++l) out.batch.motion.push_back(imu_delta(scenario, l, frame));

  const auto observations = observe(scenario, frame);
  const auto sources = align_sources(observations, alignment);
  std::size_t used = 0;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    // Enrolled voices tell which node is talking, and so its transmit level.
    std::optional<std::size_t> speaker;
    double best = alignment.threshold;
    for (std::size_t n = 0; n < scenario.num_nodes(); ++n) {
      const double sim = cosine_similarity(sources[s].representative, scenario.embeddings[n]);
      if (sim > best) {
        best = sim;
        speaker = n;
      }
    }
    if (!speaker) continue;
    for (const auto& m : sources[s].members) {
      const auto& obs = observations[m.index];
      PolarObservation p = obs.obs;
      try {
        p.distance = estimate_distance(scenario.txLevelDb[*speaker], obs.soundLevel);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ImplausibleGain) throw;
        continue;
      }
      p.weight = kDistanceObservationWeight;
      out.batch.observations.push_back({obs.nodeId, s, p});
      ++used;
    }
  }
  out.droppedObservations = observations.size() - used;
  return out;
}

std::vector<PipelineBatch> build_batches(const Scenario& scenario, const PipelineOptions& options) {
  std::vector<PipelineBatch> out;
  for (std::size_t f : select_batch_frames(scenario, options.batchIntervalS)) {
    out.push_back(build_batch(scenario, f, options.alignment));
  }
  return out;
}

std::vector<NodePoseSnapshot> aligned_snapshots(std::span<const Pose2> estimated,
                                                std::span<const NodePoseSnapshot> truth) {
  if (estimated.size() != truth.size()) throw Error(ErrorCode::IdMismatch, "pose and truth counts differ");
  std::vector<Vec2> from, to;
  for (const auto& p : estimated) from.push_back(p.translation);
  for (const auto& t : truth) to.push_back(t.position);
  const Pose2 g = gauge_transform(from, to);
  std::vector<NodePoseSnapshot> out;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    out.push_back(NodePoseSnapshot::from_pose(truth[i].nodeId, g.compose(estimated[i])));
  }
  return out;
}

std::vector<WindowRow> run_pipeline(const Scenario& scenario, const PipelineOptions& options) {
  options.validate();
  SlidingCalibrator calibrator(scenario.num_nodes(), options.window, options.calibration);
  std::vector<WindowRow> rows;
  const auto batches = build_batches(scenario, options);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto est = calibrator.push(batches[b].batch);
    if (!est) continue;
    const auto truth = frame_truth(scenario, batches[b].frame).snapshots;
    WindowRow row;
    row.batchIndex = b;
    row.frame = batches[b].frame;
    row.timestamp = batches[b].batch.timestamp;
    row.fresh = est->fresh;
    row.metrics = evaluate(aligned_snapshots(est->currentPoses, truth), truth);
    row.costBefore = est->costBefore;
    row.costAfter = est->costAfter;
    row.iterations = est->iterations;
    row.wallTimeMs = options.timing ? est->wallTimeMs : 0.0;
    rows.push_back(row);
  }
  if (rows.empty()) {
    throw Error(ErrorCode::InsufficientObservations,
                "no calibration window was solvable over " + std::to_string(batches.size()) + " batches");
  }
  return rows;
}

ColdStart cold_start(const Scenario& scenario, std::size_t numBatches, const PipelineOptions& options) {
  options.validate();
  if (numBatches == 0) throw Error(ErrorCode::InvalidArgument, "numBatches must be positive");
  const auto batches = build_batches(scenario, options);
  if (batches.size() < numBatches) {
    throw Error(ErrorCode::InsufficientObservations, "scenario yields only " + std::to_string(batches.size()) +
                                                         " batches, " + std::to_string(numBatches) + " requested");
  }
  std::vector<ObservationBatch> window;
  for (std::size_t b = 0; b < numBatches; ++b) window.push_back(batches[b].batch);
  const WindowConfig config{std::max<std::size_t>(numBatches, 2), kNoDecayFloorS};

  ColdStart out;
  out.frame = batches[numBatches - 1].frame;
  out.truth = frame_truth(scenario, out.frame).snapshots;
  const auto est = calibrate_window(window, scenario.num_nodes(), config, options.calibration);
  if (!est) {
    out.metrics.setupAccuracy = setup_accuracy({}, out.truth);
    out.metrics.orientationErrorDeg = std::numeric_limits<double>::quiet_NaN();
    out.metrics.positionErrorM = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.solved = true;
  out.estimated = aligned_snapshots(est->currentPoses, out.truth);
  out.metrics = evaluate(out.estimated, out.truth);
  return out;
}

}  // namespace earnet
