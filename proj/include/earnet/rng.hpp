#pragma once

// Portable deterministic randomness. std::mt19937_64 is fully specified by
// the standard; the standard distributions are not, so the conversions to
// uniform and normal variates are written out here.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace earnet {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of an independent substream identified by `path` under `root`.
inline constexpr std::uint64_t substream_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Substream tags.
enum class Stream : std::uint64_t { Room = 1, Trajectory, Schedule, Embedding, Observation, Drift, Heading };

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root, Stream stream, std::initializer_list<std::uint64_t> path = {})
      : engine_(seed_for(root, stream, path)) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n), n > 0, by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
  }

  /// Box-Muller; one variate per call so that the stream position does not
  /// depend on call history.
  double normal(double sigma = 1.0) {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool chance(double p) { return uniform01() < p; }

 private:
  static std::uint64_t seed_for(std::uint64_t root, Stream stream, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = substream_seed(root, {static_cast<std::uint64_t>(stream)});
    for (std::uint64_t p : path) h = substream_seed(h, {p});
    return h;
  }

  std::mt19937_64 engine_;
};

}  // namespace earnet
