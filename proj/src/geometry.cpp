#include "earnet/geometry.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "earnet/error.hpp"

namespace earnet {

double wrap_angle(double radians) noexcept {
  constexpr double pi = std::numbers::pi;
  if (radians > -pi && radians <= pi) return radians;
  double r = std::remainder(radians, 2.0 * pi);  // [-pi, pi]
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

Svd2 svd(const Mat2& m) noexcept {
  const double e = 0.5 * (m.m00 + m.m11);
  const double f = 0.5 * (m.m00 - m.m11);
  const double g = 0.5 * (m.m10 + m.m01);
  const double h = 0.5 * (m.m10 - m.m01);
  const double q = std::hypot(e, h);
  const double r = std::hypot(f, g);
  const double a1 = std::atan2(g, f);
  const double a2 = std::atan2(h, e);
  // m = Rot(phi) * diag(q + r, q - r) * Rot(theta)
  const double theta = 0.5 * (a2 - a1);
  const double phi = 0.5 * (a2 + a1);

  Svd2 out;
  out.u = Rotation2(phi).matrix();
  out.v = Rotation2(-theta).matrix();
  out.s0 = q + r;
  out.s1 = q - r;
  if (out.s1 < 0.0) {
    out.s1 = -out.s1;
    out.u.m01 = -out.u.m01;
    out.u.m11 = -out.u.m11;
  }
  return out;
}

Vec2 polar_to_local(const PolarObservation& obs) noexcept {
  return {obs.distance * std::cos(obs.azimuth), obs.distance * std::sin(obs.azimuth)};
}

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(ErrorCode::InvalidArgument, std::string(what) + ": length mismatch");
}

double total_weight(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidArgument, "weights must be finite and >= 0");
    total += w;
  }
  if (total <= 0.0) throw Error(ErrorCode::ZeroTotalWeight, "sum of weights is zero");
  return total;
}

double weighted_spread(std::span<const Vec2> pts, std::span<const double> weights, const Vec2& centroid) {
  double spread = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) spread += weights[i] * squared_norm(pts[i] - centroid);
  return spread;
}

}  // namespace

Vec2 weighted_centroid(std::span<const Vec2> points, std::span<const double> weights) {
  require_same_size(points.size(), weights.size(), "weighted_centroid");
  if (points.empty()) throw Error(ErrorCode::ZeroTotalWeight, "weighted_centroid of an empty set");
  const double total = total_weight(weights);
  Vec2 acc;
  for (std::size_t i = 0; i < points.size(); ++i) acc += weights[i] * points[i];
  return acc * (1.0 / total);
}

Mat2 dispersion_matrix(std::span<const Vec2> localPts, std::span<const Vec2> globalPts,
                       std::span<const double> weights) {
  require_same_size(localPts.size(), globalPts.size(), "dispersion_matrix");
  require_same_size(localPts.size(), weights.size(), "dispersion_matrix");
  const Vec2 lbar = weighted_centroid(localPts, weights);
  const Vec2 gbar = weighted_centroid(globalPts, weights);
  Mat2 d;
  for (std::size_t i = 0; i < localPts.size(); ++i) {
    const Vec2 l = localPts[i] - lbar;
    const Vec2 g = globalPts[i] - gbar;
    const double w = weights[i];
    d.m00 += w * l.x * g.x;
    d.m01 += w * l.x * g.y;
    d.m10 += w * l.y * g.x;
    d.m11 += w * l.y * g.y;
  }
  const double k = static_cast<double>(localPts.size());
  return {d.m00 / k, d.m01 / k, d.m10 / k, d.m11 / k};
}

Pose2 match_datasets(std::span<const Vec2> localPts, std::span<const Vec2> globalPts,
                     std::span<const double> weights) {
  require_same_size(localPts.size(), globalPts.size(), "match_datasets");
  require_same_size(localPts.size(), weights.size(), "match_datasets");
  const auto positive = std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
  if (positive < 2) throw Error(ErrorCode::DegenerateConfiguration, "need at least two weighted points");

  const double total = total_weight(weights);
  const Vec2 lbar = weighted_centroid(localPts, weights);
  const Vec2 gbar = weighted_centroid(globalPts, weights);

  // Relative threshold: coincident points only differ by rounding.
  constexpr double kTiny = 1e-24;
  const double lspread = weighted_spread(localPts, weights, lbar) / total;
  const double gspread = weighted_spread(globalPts, weights, gbar) / total;
  if (lspread <= kTiny * (1.0 + squared_norm(lbar)) || gspread <= kTiny * (1.0 + squared_norm(gbar))) {
    throw Error(ErrorCode::DegenerateConfiguration, "weighted points coincide; rotation undefined");
  }

  const Svd2 dec = svd(dispersion_matrix(localPts, globalPts, weights));
  Mat2 v = dec.v;
  Mat2 r = v * dec.u.transposed();
  if (r.det() < 0.0) {
    v.m01 = -v.m01;
    v.m11 = -v.m11;
    r = v * dec.u.transposed();
  }
  const Rotation2 rot = Rotation2::from_matrix(r);
  return {rot, gbar - rot.apply(lbar)};
}

Vec2 estimate_source(std::span<const Vec2> projections, std::span<const double> weights) {
  return weighted_centroid(projections, weights);
}

namespace {

void check_dimensions(const GeometryEstimate& g, std::span<const SourceObservation> obs) {
  for (const auto& o : obs) {
    if (o.node >= g.nodePoses.size() || o.source >= g.sourcePositions.size()) {
      throw Error(ErrorCode::InvalidArgument, "observation references a node or source outside the geometry");
    }
  }
}

double residual2(const GeometryEstimate& g, const SourceObservation& o) {
  return squared_norm(g.sourcePositions[o.source] - g.nodePoses[o.node].apply(o.local));
}

}  // namespace

std::vector<double> residual_weights(const GeometryEstimate& geometry,
                                     std::span<const SourceObservation> observations, double epsilon) {
  check_dimensions(geometry, observations);
  std::vector<double> out;
  out.reserve(observations.size());
  for (const auto& o : observations) out.push_back(1.0 / (epsilon + residual2(geometry, o)));
  return out;
}

double cost(const GeometryEstimate& geometry, std::span<const SourceObservation> observations,
            std::span<const double> weights) {
  require_same_size(observations.size(), weights.size(), "cost");
  check_dimensions(geometry, observations);
  double total = 0.0;
  for (std::size_t i = 0; i < observations.size(); ++i) total += weights[i] * residual2(geometry, observations[i]);
  return total;
}

double cost(const GeometryEstimate& geometry, std::span<const SourceObservation> observations) {
  std::vector<double> w;
  w.reserve(observations.size());
  for (const auto& o : observations) w.push_back(o.weight);
  return cost(geometry, observations, w);
}

namespace {

constexpr double kCoincidentRelTol = 1e-9;

struct ProblemIndex {
  std::size_t numNodes = 0;
  std::size_t numSources = 0;
  std::vector<std::vector<std::size_t>> byNode;
  std::vector<std::vector<std::size_t>> bySource;
};

ProblemIndex index_problem(std::span<const SourceObservation> obs) {
  if (obs.empty()) throw Error(ErrorCode::InsufficientObservations, "no observations");
  ProblemIndex idx;
  for (const auto& o : obs) {
    if (!is_finite(o.local) || !std::isfinite(o.weight) || o.weight < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "observations must be finite with nonnegative weight");
    }
    idx.numNodes = std::max(idx.numNodes, o.node + 1);
    idx.numSources = std::max(idx.numSources, o.source + 1);
  }
  idx.byNode.resize(idx.numNodes);
  idx.bySource.resize(idx.numSources);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].weight <= 0.0) continue;
    idx.byNode[obs[i].node].push_back(i);
    idx.bySource[obs[i].source].push_back(i);
  }

  if (idx.numNodes < 2) throw Error(ErrorCode::InsufficientObservations, "need at least two nodes");
  for (std::size_t l = 0; l < idx.numNodes; ++l) {
    auto& list = idx.byNode[l];
    std::vector<std::size_t> sources;
    for (auto i : list) sources.push_back(obs[i].source);
    std::sort(sources.begin(), sources.end());
    if (std::adjacent_find(sources.begin(), sources.end()) != sources.end()) {
      throw Error(ErrorCode::InvalidArgument, "node " + std::to_string(l) + " observes a source twice");
    }
    if (sources.size() < 2) {
      throw Error(ErrorCode::InsufficientObservations, "node " + std::to_string(l) + " observes fewer than two sources");
    }
    // A non-anchor node whose sources all sit at one local point has no
    // observable orientation (e.g. one talker heard repeatedly).
    if (l == 0) continue;
    const Vec2 first = obs[list.front()].local;
    double spread = 0.0, scale = 1.0;
    for (auto i : list) {
      spread = std::max(spread, norm(obs[i].local - first));
      scale = std::max(scale, norm(obs[i].local));
    }
    if (spread <= kCoincidentRelTol * scale) {
      throw Error(ErrorCode::DegenerateConfiguration,
                  "node " + std::to_string(l) + " observes all its sources at one point");
    }
  }
  for (std::size_t k = 0; k < idx.numSources; ++k) {
    if (idx.bySource[k].size() < 2) {
      throw Error(ErrorCode::InsufficientObservations,
                  "source " + std::to_string(k) + " is observed by fewer than two nodes");
    }
  }

  // The node/source incidence graph must be connected, otherwise the
  // relative pose of disconnected parts is unobservable.
  std::vector<bool> nodeSeen(idx.numNodes, false), sourceSeen(idx.numSources, false);
  std::vector<std::size_t> stack{0};
  nodeSeen[0] = true;
  while (!stack.empty()) {
    const std::size_t l = stack.back();
    stack.pop_back();
    for (auto i : idx.byNode[l]) {
      const std::size_t k = obs[i].source;
      if (sourceSeen[k]) continue;
      sourceSeen[k] = true;
      for (auto j : idx.bySource[k]) {
        if (!nodeSeen[obs[j].node]) {
          nodeSeen[obs[j].node] = true;
          stack.push_back(obs[j].node);
        }
      }
    }
  }
  if (std::find(nodeSeen.begin(), nodeSeen.end(), false) != nodeSeen.end()) {
    throw Error(ErrorCode::InsufficientObservations, "observation graph is disconnected");
  }
  return idx;
}

struct Gathered {
  std::vector<Vec2> local;
  std::vector<Vec2> global;
  std::vector<double> weights;
};

void update_sources(GeometryEstimate& g, std::span<const SourceObservation> obs, const ProblemIndex& idx,
                    std::span<const double> weights) {
  std::vector<Vec2> proj;
  std::vector<double> w;
  for (std::size_t k = 0; k < idx.numSources; ++k) {
    proj.clear();
    w.clear();
    for (auto i : idx.bySource[k]) {
      proj.push_back(g.nodePoses[obs[i].node].apply(obs[i].local));
      w.push_back(weights[i]);
    }
    double total = 0.0;
    for (double x : w) total += x;
    if (total > 0.0) g.sourcePositions[k] = estimate_source(proj, w);
  }
}

void update_node(GeometryEstimate& g, std::size_t l, std::span<const SourceObservation> obs,
                 const ProblemIndex& idx, std::span<const double> weights) {
  Gathered data;
  for (auto i : idx.byNode[l]) {
    data.local.push_back(obs[i].local);
    data.global.push_back(g.sourcePositions[obs[i].source]);
    data.weights.push_back(weights[i]);
  }
  try {
    g.nodePoses[l] = match_datasets(data.local, data.global, data.weights);
  } catch (const Error& e) {
    // Pose stays put; happens only if residual weights vanish for all but one point.
    if (e.code() != ErrorCode::DegenerateConfiguration && e.code() != ErrorCode::ZeroTotalWeight) throw;
  }
}

// Deterministic cold start: node 0 at the origin, its observations seed the
// sources; remaining nodes are posed in index order against whatever sources
// are already placed.
GeometryEstimate cold_start(std::span<const SourceObservation> obs, const ProblemIndex& idx) {
  GeometryEstimate g;
  g.nodePoses.assign(idx.numNodes, Pose2::identity());
  g.sourcePositions.assign(idx.numSources, Vec2{});
  std::vector<bool> placed(idx.numSources, false);
  std::vector<bool> posed(idx.numNodes, false);

  auto place_sources_of = [&](std::size_t l) {
    for (auto i : idx.byNode[l]) {
      const std::size_t k = obs[i].source;
      if (!placed[k]) {
        g.sourcePositions[k] = g.nodePoses[l].apply(obs[i].local);
        placed[k] = true;
      }
    }
    posed[l] = true;
  };
  place_sources_of(0);

  for (std::size_t remaining = idx.numNodes - 1; remaining > 0; --remaining) {
    bool progressed = false;
    for (std::size_t l = 1; l < idx.numNodes && !progressed; ++l) {
      if (posed[l]) continue;
      Gathered data;
      for (auto i : idx.byNode[l]) {
        if (!placed[obs[i].source]) continue;
        data.local.push_back(obs[i].local);
        data.global.push_back(g.sourcePositions[obs[i].source]);
        data.weights.push_back(obs[i].weight);
      }
      if (data.local.size() < 2) continue;
      try {
        g.nodePoses[l] = match_datasets(data.local, data.global, data.weights);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateConfiguration) throw;
        continue;
      }
      place_sources_of(l);
      progressed = true;
    }
    if (progressed) continue;

    // No node shares two placed sources: translate the first node touching
    // a placed source onto it with zero rotation.
    for (std::size_t l = 1; l < idx.numNodes && !progressed; ++l) {
      if (posed[l]) continue;
      Vec2 offset;
      double total = 0.0;
      for (auto i : idx.byNode[l]) {
        if (!placed[obs[i].source]) continue;
        offset += obs[i].weight * (g.sourcePositions[obs[i].source] - obs[i].local);
        total += obs[i].weight;
      }
      if (total <= 0.0) continue;
      g.nodePoses[l] = {Rotation2{}, offset * (1.0 / total)};
      place_sources_of(l);
      progressed = true;
    }
    if (!progressed) throw Error(ErrorCode::InsufficientObservations, "observation graph is disconnected");
  }
  return g;
}

}  // namespace

CalibrationResult calibrate(std::span<const SourceObservation> observations, const CalibrationOptions& options) {
  const ProblemIndex idx = index_problem(observations);
  const std::size_t n = observations.size();

  std::vector<double> prior(n);
  for (std::size_t i = 0; i < n; ++i) prior[i] = observations[i].weight;

  GeometryEstimate g;
  if (options.initialPoses) {
    if (options.initialPoses->size() != idx.numNodes) {
      throw Error(ErrorCode::InvalidArgument, "initial poses do not match the node count");
    }
    const Pose2 regauge = options.initialPoses->front().inverse();
    g.nodePoses.reserve(idx.numNodes);
    for (const auto& p : *options.initialPoses) g.nodePoses.push_back(regauge.compose(p));
    g.nodePoses.front() = Pose2::identity();
    g.sourcePositions.assign(idx.numSources, Vec2{});
    update_sources(g, observations, idx, prior);
  } else {
    g = cold_start(observations, idx);
  }

  CalibrationResult result;
  result.initialPriorCost = cost(g, observations, prior);

  std::vector<double> weights = prior;
  auto run = [&](bool refresh) {
    for (int it = 0; it < options.maxIterations; ++it) {
      if (refresh) {
        const auto rw = residual_weights(g, observations, options.residualEpsilon);
        for (std::size_t i = 0; i < n; ++i) weights[i] = prior[i] * rw[i];
      }
      const double before = cost(g, observations, weights);
      for (std::size_t l = 1; l < idx.numNodes; ++l) update_node(g, l, observations, idx, weights);
      update_sources(g, observations, idx, weights);
      const double after = cost(g, observations, weights);

      result.sweeps.push_back({before, after});
      result.weights = weights;
      ++result.iterations;
      if (before - after <= options.relativeTolerance * before) return true;
    }
    return false;
  };
  if (options.refreshResidualWeights && options.priorWeightWarmup) run(false);
  result.converged = run(options.refreshResidualWeights);
  if (result.sweeps.empty()) result.weights = weights;

  g.finalCost = cost(g, observations, result.weights);
  result.finalPriorCost = cost(g, observations, prior);
  result.estimate = std::move(g);
  return result;
}

CalibrationResult calibrate(const std::vector<std::vector<IndexedPolar>>& perNode, const CalibrationOptions& options) {
  std::vector<SourceObservation> flat;
  for (std::size_t l = 0; l < perNode.size(); ++l) {
    for (const auto& p : perNode[l]) {
      if (p.obs.distance < 0.0) throw Error(ErrorCode::InvalidArgument, "negative distance");
      flat.push_back({l, p.source, polar_to_local(p.obs), p.obs.weight});
    }
  }
  return calibrate(flat, options);
}

Pose2 gauge_transform(std::span<const Vec2> estimated, std::span<const Vec2> reference) {
  require_same_size(estimated.size(), reference.size(), "gauge_transform");
  if (estimated.size() < 2) throw Error(ErrorCode::DegenerateConfiguration, "gauge alignment needs two nodes");
  const std::vector<double> unit(estimated.size(), 1.0);
  return match_datasets(estimated, reference, unit);
}

GeometryEstimate transform_geometry(const Pose2& t, const GeometryEstimate& geometry) {
  GeometryEstimate out;
  out.finalCost = geometry.finalCost;
  out.nodePoses.reserve(geometry.nodePoses.size());
  for (const auto& p : geometry.nodePoses) out.nodePoses.push_back(t.compose(p));
  out.sourcePositions.reserve(geometry.sourcePositions.size());
  for (const auto& s : geometry.sourcePositions) out.sourcePositions.push_back(t.apply(s));
  return out;
}

GeometryEstimate gauge_align(const GeometryEstimate& estimate, const GeometryEstimate& reference) {
  if (estimate.nodePoses.size() != reference.nodePoses.size() ||
      estimate.sourcePositions.size() != reference.sourcePositions.size()) {
    throw Error(ErrorCode::InvalidArgument, "gauge_align: geometries differ in size");
  }
  std::vector<Vec2> est, ref;
  for (const auto& p : estimate.nodePoses) est.push_back(p.translation);
  for (const auto& p : reference.nodePoses) ref.push_back(p.translation);
  return transform_geometry(gauge_transform(est, ref), estimate);
}

}  // namespace earnet
