#pragma once

// Cross-node source association by speaker-embedding similarity, and
// transmitter/receiver distance estimation from sound levels.

#include <cstddef>
#include <span>
#include <vector>

#include "earnet/observation.hpp"

namespace earnet {

inline constexpr double kSameSourceSimilarity = 0.8;

struct ObservationRef {
  std::size_t nodeId = 0;
  std::size_t timeIndex = 0;
  std::size_t index = 0;  // position in the input list
};

struct AlignedSource {
  std::size_t groupId = 0;
  std::vector<ObservationRef> members;
  Embedding representative;  // normalized mean of the members

  std::size_t distinct_nodes() const;
};

struct AlignmentOptions {
  double threshold = kSameSourceSimilarity;
  std::size_t minNodes = 2;
};

/// Every group formed, including ones spanning too few nodes.
struct AlignmentDiagnostics {
  std::vector<AlignedSource> groups;
};

AlignmentDiagnostics align_sources_detailed(std::span<const MobileObservation> observations,
                                            const AlignmentOptions& options = {});

/// Greedy first-fit grouping in (nodeId, input order). Returns the groups
/// spanning at least `minNodes` distinct nodes.
std::vector<AlignedSource> align_sources(std::span<const MobileObservation> observations,
                                         const AlignmentOptions& options = {});

inline constexpr double kReferenceDistanceM = 1.0;
inline constexpr double kAmplifiedPathGuardDb = 3.0;
/// Closest plausible talker distance. Receivers nearer than the reference
/// distance legitimately read a higher level than the transmitter reports.
inline constexpr double kMinPlausibleDistanceM = 0.5;

/// Free-field spherical spreading: 20 dB per decade of distance.
double received_level(double txLevelDb, double distanceM, double referenceDistanceM = kReferenceDistanceM);

/// Largest rx - tx gain accepted: the gain at kMinPlausibleDistanceM plus the 3 dB guard.
double max_plausible_gain_db(double referenceDistanceM = kReferenceDistanceM);

/// Inverse of received_level. Throws ImplausibleGain beyond max_plausible_gain_db.
double estimate_distance(double txLevelDb, double rxLevelDb, double referenceDistanceM = kReferenceDistanceM);

struct Interval {
  double start = 0.0;
  double end = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct SourceSegment {
  double start = 0.0;
  double end = 0.0;
  std::size_t speaker = 0;
  friend bool operator==(const SourceSegment&, const SourceSegment&) = default;
};

/// Maximal intervals in which exactly one speaker is active. `activity[s]`
/// lists speaker s's half-open on-intervals. A segment ends where the single
/// active speaker changes.
std::vector<SourceSegment> single_source_segments(std::span<const std::vector<Interval>> activity);

}  // namespace earnet
