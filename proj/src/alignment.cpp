#include "earnet/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "earnet/error.hpp"

namespace earnet {

std::size_t AlignedSource::distinct_nodes() const {
  std::set<std::size_t> nodes;
  for (const auto& m : members) nodes.insert(m.nodeId);
  return nodes.size();
}

namespace {

struct Working {
  AlignedSource group;
  std::vector<double> sum;
  std::set<std::size_t> nodes;
};

}  // namespace

AlignmentDiagnostics align_sources_detailed(std::span<const MobileObservation> observations,
                                            const AlignmentOptions& options) {
  std::vector<std::size_t> order(observations.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return observations[a].nodeId < observations[b].nodeId;
  });

  std::vector<Working> groups;
  std::vector<double> candidate;
  for (std::size_t idx : order) {
    const auto& obs = observations[idx];
    const auto& e = obs.embedding.values();
    if (e.empty()) throw Error(ErrorCode::ZeroVector, "observation without embedding");

    bool joined = false;
    for (auto& w : groups) {
      if (w.nodes.contains(obs.nodeId)) continue;
      if (cosine_similarity(w.group.representative, obs.embedding) <= options.threshold) continue;

      // The updated representative must still be close to every member.
      candidate = w.sum;
      for (std::size_t i = 0; i < e.size(); ++i) candidate[i] += e[i];
      bool keeps = cosine_similarity(candidate, e) > options.threshold;
      for (const auto& m : w.group.members) {
        if (!keeps) break;
        keeps = cosine_similarity(candidate, observations[m.index].embedding.values()) > options.threshold;
      }
      if (!keeps) continue;

      w.sum = candidate;
      w.group.representative = Embedding::normalized(w.sum);
      w.group.members.push_back({obs.nodeId, obs.timeIndex, idx});
      w.nodes.insert(obs.nodeId);
      joined = true;
      break;
    }
    if (joined) continue;

    Working w;
    w.group.groupId = groups.size();
    w.group.members.push_back({obs.nodeId, obs.timeIndex, idx});
    w.group.representative = obs.embedding;
    w.sum = e;
    w.nodes.insert(obs.nodeId);
    groups.push_back(std::move(w));
  }

  AlignmentDiagnostics diag;
  diag.groups.reserve(groups.size());
  for (auto& w : groups) diag.groups.push_back(std::move(w.group));
  return diag;
}

std::vector<AlignedSource> align_sources(std::span<const MobileObservation> observations,
                                         const AlignmentOptions& options) {
  auto diag = align_sources_detailed(observations, options);
  std::vector<AlignedSource> out;
  for (auto& g : diag.groups)
    if (g.distinct_nodes() >= options.minNodes) out.push_back(std::move(g));
  return out;
}

double received_level(double txLevelDb, double distanceM, double referenceDistanceM) {
  if (!(distanceM > 0.0) || !(referenceDistanceM > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "distances must be positive");
  }
  return txLevelDb - 20.0 * std::log10(distanceM / referenceDistanceM);
}

double max_plausible_gain_db(double referenceDistanceM) {
  return 20.0 * std::log10(referenceDistanceM / kMinPlausibleDistanceM) + kAmplifiedPathGuardDb;
}

double estimate_distance(double txLevelDb, double rxLevelDb, double referenceDistanceM) {
  if (!std::isfinite(txLevelDb) || !std::isfinite(rxLevelDb)) {
    throw Error(ErrorCode::InvalidArgument, "levels must be finite");
  }
  if (!(referenceDistanceM > 0.0)) throw Error(ErrorCode::InvalidArgument, "reference distance must be positive");
  if (rxLevelDb > txLevelDb + max_plausible_gain_db(referenceDistanceM)) {
    throw Error(ErrorCode::ImplausibleGain,
                "received level exceeds transmitted level by " + std::to_string(rxLevelDb - txLevelDb) + " dB");
  }
  return referenceDistanceM * std::pow(10.0, (txLevelDb - rxLevelDb) / 20.0);
}

std::vector<SourceSegment> single_source_segments(std::span<const std::vector<Interval>> activity) {
  std::vector<double> cuts;
  for (const auto& list : activity) {
    for (const auto& iv : list) {
      if (!(iv.start < iv.end)) throw Error(ErrorCode::InvalidArgument, "interval start must precede end");
      cuts.push_back(iv.start);
      cuts.push_back(iv.end);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<SourceSegment> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    const double mid = 0.5 * (a + b);
    std::size_t active = 0, speaker = 0;
    for (std::size_t s = 0; s < activity.size(); ++s) {
      const bool on = std::any_of(activity[s].begin(), activity[s].end(),
                                  [&](const Interval& iv) { return iv.start <= mid && mid < iv.end; });
      if (on) {
        ++active;
        speaker = s;
      }
    }
    if (active != 1) continue;
    if (!out.empty() && out.back().end == a && out.back().speaker == speaker) {
      out.back().end = b;
    } else {
      out.push_back({a, b, speaker});
    }
  }
  return out;
}

}  // namespace earnet
