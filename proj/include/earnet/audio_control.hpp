#pragma once

// Relay-audio control: delay estimation by cross-correlation, the
// time-variant / time-invariant mode switch, and bandwidth allocation under
// a total budget with utility sum(level / distance).

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace earnet {

struct DelayEstimate {
  std::size_t lagSamples = 0;
  double delayMs = 0.0;
  double peak = 0.0;  // normalized correlation at the chosen lag
};

inline constexpr double kFirstPeakFraction = 0.5;

/// Delay of `received` relative to `reference`: the first local maximum of
/// the normalized cross-correlation, over nonnegative lags, that reaches half
/// the global maximum. Throws ZeroEnergy or NoPeak.
DelayEstimate estimate_delay(std::span<const double> reference, std::span<const double> received,
                             double sampleRateHz);

/// Normalized cross-correlation for lags 0..received.size()-1.
std::vector<double> cross_correlation(std::span<const double> reference, std::span<const double> received);

enum class FeatureMode { TimeVariant, TimeInvariant };

inline constexpr double kDefaultDelayThresholdMs = 50.0;

/// TimeVariant iff delayMs <= thresholdMs.
FeatureMode select_mode(double delayMs, double thresholdMs = kDefaultDelayThresholdMs);

const char* to_string(FeatureMode mode);

/// Bandwidth levels in kbit/s; 0 sends only the speaker embedding.
inline constexpr std::array<int, 6> kBandwidthLevels{0, 8, 16, 32, 64, 128};

/// Exhaustive search is used up to this many time-variant streams.
inline constexpr std::size_t kMaxExhaustiveStreams = 5;

struct StreamDescriptor {
  int streamId = 0;
  double distanceM = 1.0;
  std::optional<double> measuredDelayMs;
};

struct AllocationEntry {
  int streamId = 0;
  int level = 0;
  FeatureMode mode = FeatureMode::TimeVariant;
};

struct AllocationPlan {
  std::vector<AllocationEntry> entries;  // in input order
  double utility = 0.0;
  bool exhaustive = true;

  int total() const;
};

/// sum(level_i / distance_i) over the entries; `levels` is parallel to `streams`.
double plan_utility(std::span<const StreamDescriptor> streams, std::span<const int> levels);

/// Modes from measured delays (absent delay: TimeVariant), then exhaustive or
/// greedy allocation depending on the time-variant stream count.
AllocationPlan allocate_bandwidth(std::span<const StreamDescriptor> streams, int totalBudget,
                                  double thresholdMs = kDefaultDelayThresholdMs);

/// The individual strategies. Each pins time-invariant streams to level 0.
AllocationPlan allocate_exhaustive(std::span<const StreamDescriptor> streams, int totalBudget,
                                   double thresholdMs = kDefaultDelayThresholdMs);
AllocationPlan allocate_greedy(std::span<const StreamDescriptor> streams, int totalBudget,
                               double thresholdMs = kDefaultDelayThresholdMs);
/// Every stream gets the largest level not above budget / n.
AllocationPlan allocate_equal_split(std::span<const StreamDescriptor> streams, int totalBudget,
                                    double thresholdMs = kDefaultDelayThresholdMs);
/// Streams in input order each take the largest level that still fits.
AllocationPlan allocate_waterfall(std::span<const StreamDescriptor> streams, int totalBudget,
                                  double thresholdMs = kDefaultDelayThresholdMs);

}  // namespace earnet
