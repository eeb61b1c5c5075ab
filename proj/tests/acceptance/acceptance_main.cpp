// Acceptance gate: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "earnet/alignment.hpp"
#include "earnet/audio_control.hpp"
#include "earnet/conversation.hpp"
#include "earnet/error.hpp"
#include "earnet/geometry.hpp"
#include "earnet/mobile.hpp"
#include "earnet/pipeline.hpp"
#include "earnet/simulator.hpp"
#include "../test_support.hpp"

using namespace earnet;
using earnet::testing::TestRng;

namespace {

// Tolerances, pinned.
constexpr double kExactPositionM = 1e-6;
constexpr double kExactOrientationRad = 1e-6;
constexpr double kCriterion1BudgetS = 1.0;
constexpr double kGridStep = 1e-3;
constexpr double kGridSlack = 1e-6;
constexpr double kTargetAccuracy = 0.90;
constexpr double kWallTimeBudgetS = 0.2;
constexpr double kPathLossRelTol = 1e-9;
constexpr double kRotationDetTol = 1e-12;
constexpr double kCostMonotoneRelTol = 1e-12;
constexpr double kGaugeCostRelTol = 1e-9;
constexpr int kPropertyCases = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome criterion1() {
  double maxPos = 0.0, maxOri = 0.0;
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TestRng rng(1000 + seed);
    const auto scene = testing::make_scene(rng, 4, 20);
    const auto result = calibrate(scene.observations);
    const auto e = testing::pose_errors_after_alignment(result.estimate.nodePoses, scene.poses);
    maxPos = std::max(maxPos, e.maxPosition);
    maxOri = std::max(maxOri, e.maxOrientation);
  }
  const double elapsed = seconds_since(t0);
  return {maxPos < kExactPositionM && maxOri < kExactOrientationRad && elapsed < kCriterion1BudgetS,
          fmt("max position %.3g m, max orientation %.3g rad over 100 seeds, %.3f s", maxPos, maxOri, elapsed)};
}

Outcome criterion2() {
  double maxPos = 0.0, maxOri = 0.0;
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TestRng rng(2000 + seed);
    testing::StreamOptions opt;
    opt.speed = 1.0;
    opt.turnRate = 0.2;
    const auto stream = testing::make_stream(rng, opt);
    const WindowConfig cfg{opt.numBatches, 0.1};
    const auto est = calibrate_window(stream.batches, opt.numNodes, cfg, {});
    if (!est) continue;
    ++solved;
    // Both the window-start poses and the dead-reckoned current poses must match.
    for (const auto& [poses, truth] : {std::pair{est->geometry.nodePoses, stream.truth.front()},
                                       std::pair{est->currentPoses, stream.truth.back()}}) {
      const auto e = testing::pose_errors_after_alignment(poses, truth);
      maxPos = std::max(maxPos, e.maxPosition);
      maxOri = std::max(maxOri, e.maxOrientation);
    }
  }
  return {solved == 100 && maxPos < kExactPositionM && maxOri < kExactOrientationRad,
          fmt("1 m/s, exact motion: %d/100 solved, max position %.3g m, max orientation %.3g rad", solved, maxPos,
              maxOri)};
}

Outcome criterion3() {
  double worst = -1e300;
  CalibrationOptions opt;
  opt.refreshResidualWeights = false;  // the grid minimizes the unweighted cost
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    TestRng rng(3000 + seed);
    const auto scene = testing::make_scene(rng, 2, 3, {10.0, 0.2});
    std::vector<Vec2> l0(3), l1(3);
    for (const auto& o : scene.observations) (o.node == 0 ? l0 : l1)[o.source] = o.local;
    const auto result = calibrate(scene.observations, opt);
    const double grid = testing::two_node_grid_minimum(l0, l1, kGridStep);
    worst = std::max(worst, cost(result.estimate, scene.observations) - (grid + kGridSlack));
  }
  return {worst <= 0.0, fmt("max (cost - grid minimum - 1e-6) = %.3g over 50 instances", worst)};
}

Outcome criterion4() {
  SimulationConfig c;
  c.roomWidth = c.roomHeight = 8.0;
  c.speed = 0.5;
  c.durationS = 90.0;
  c.noise.doaSigmaDeg = 5.0;
  c.noise.distanceSigmaRel = 0.1;
  c.noise.embeddingSigma = 0.01;
  std::vector<double> at5, at50;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Scenario sc = generate_scenario(c, seed);
    at5.push_back(cold_start(sc, 5).metrics.setupAccuracy);
    at50.push_back(cold_start(sc, 50).metrics.setupAccuracy);
  }
  const double m5 = median(at5), m50 = median(at50);
  return {m50 >= kTargetAccuracy && m50 > m5,
          fmt("median setupAccuracy %.4f at 5 batches, %.4f at 50 batches (50 seeds)", m5, m50)};
}

Outcome criterion5() {
  TestRng rng(5000);
  testing::StreamOptions opt;
  opt.numBatches = 100;
  opt.speed = 0.3;
  opt.turnRate = 0.05;
  opt.doaSigma = 5.0 * testing::kPi / 180.0;
  opt.distanceSigmaRel = 0.1;
  const auto stream = testing::make_stream(rng, opt);
  const WindowConfig cfg{100, 0.1};
  std::vector<double> times;
  bool solved = true;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t0 = Clock::now();
    solved = solved && calibrate_window(stream.batches, opt.numNodes, cfg, {}).has_value();
    times.push_back(seconds_since(t0));
  }
  const double med = median(times);
  return {solved && med <= kWallTimeBudgetS,
          fmt("100 batches x 4 nodes: median %.4f s, max %.4f s over 5 runs", med,
              *std::max_element(times.begin(), times.end()))};
}

std::vector<StreamDescriptor> random_streams(TestRng& rng, int maxStreams) {
  const int n = rng.integer(1, maxStreams);
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 1);
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  std::vector<StreamDescriptor> s;
  for (int id : ids) s.push_back({id, rng.uniform(0.3, 15.0), std::nullopt});
  return s;
}

std::vector<int> levels(const AllocationPlan& p) {
  std::vector<int> out;
  for (const auto& e : p.entries) out.push_back(e.level);
  return out;
}

Outcome criterion6() {
  TestRng rng(6000);
  int exact = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto s = random_streams(rng, 4);
    const int budget = rng.integer(0, 512);
    exact += levels(allocate_exhaustive(s, budget)) == testing::brute_force_allocation(s, budget);
  }
  int dominates = 0;
  double gainOverEqual = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto s = random_streams(rng, 10);
    const int budget = rng.integer(0, 1024);
    const double g = allocate_greedy(s, budget).utility;
    const double e = allocate_equal_split(s, budget).utility;
    const double w = allocate_waterfall(s, budget).utility;
    dominates += g >= e && g >= w;
    gainOverEqual += g - e;
  }
  return {exact == 1000 && dominates == 1000,
          fmt("exhaustive = brute force on %d/1000; greedy >= equal-split and waterfall on %d/1000 (mean gain over "
              "equal-split %.2f)",
              exact, dominates, gainOverEqual / 1000.0)};
}

std::vector<double> white(TestRng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal(1.0);
  return x;
}

std::vector<double> shifted(const std::vector<double>& x, std::size_t k) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = k; i < x.size(); ++i) y[i] = x[i - k];
  return y;
}

Outcome criterion7() {
  constexpr double fs = 8000.0;
  TestRng rng(7000);
  const auto ref = white(rng, 3200);
  int exact = 0;
  for (std::size_t k = 1; k <= 1600; ++k) exact += estimate_delay(ref, shifted(ref, k), fs).lagSamples == k;
  int noisy = 0;
  const double sigma = std::pow(10.0, -10.0 / 20.0);  // 10 dB below unit signal power
  for (int t = 0; t < 100; ++t) {
    const auto x = white(rng, 4000);
    auto y = shifted(x, 160);
    for (double& v : y) v += rng.normal(sigma);
    noisy += estimate_delay(x, y, fs).lagSamples == 160;
  }
  const bool modes = select_mode(50.0) == FeatureMode::TimeVariant &&
                     select_mode(std::nextafter(50.0, 51.0)) == FeatureMode::TimeInvariant &&
                     select_mode(0.0) == FeatureMode::TimeVariant && select_mode(60.0) == FeatureMode::TimeInvariant;
  return {exact == 1600 && noisy >= 99 && modes,
          fmt("noiseless %d/1600 exact; 10 dB SNR %d/100 exact at 160 samples; 50 ms boundary %s", exact, noisy,
              modes ? "ok" : "wrong")};
}

Outcome criterion8() {
  constexpr double tx = 65.0;
  double worst = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double d = 0.5 * std::pow(40.0, i / 10000.0);  // log-spaced over [0.5, 20]
    worst = std::max(worst, std::abs(estimate_distance(tx, received_level(tx, d)) - d) / d);
  }
  // Second route: levels synthesized by the simulator from true geometry.
  SimulationConfig c;
  c.roomWidth = c.roomHeight = 19.0;
  c.numNodes = 8;
  c.groupSize = 1;
  c.speed = 1.0;
  c.durationS = 30.0;
  c.noise.embeddingSigma = 0.01;
  const Scenario sc = generate_scenario(c, 8);
  std::size_t checked = 0;
  double lo = 1e9, hi = 0.0;
  for (std::size_t f = 0; f < sc.num_frames(); ++f) {
    for (const auto& o : observe(sc, f)) {
      const auto speakers = sc.active_speakers(f);
      const auto truth = frame_truth(sc, f);
      for (std::size_t s = 0; s < speakers.size(); ++s) {
        if (cosine_similarity(o.embedding, sc.embeddings[speakers[s]]) <= 0.9) continue;
        const double d = norm(sc.poses[f][o.nodeId].translation - truth.sourcePositions[s]);
        if (d < 0.5 || d > 20.0) continue;
        worst = std::max(worst, std::abs(estimate_distance(sc.txLevelDb[speakers[s]], o.soundLevel) - d) / d);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        ++checked;
      }
    }
  }
  return {worst < kPathLossRelTol && checked > 1000,
          fmt("max relative error %.3g over 10001 synthetic and %zu simulated levels (%.2f to %.2f m)", worst, checked,
              lo, hi)};
}

struct Property {
  const char* name;
  std::function<bool(TestRng&)> check;
};

Outcome criterion9() {
  const std::vector<Property> props{
      {"proper rotation",
       [](TestRng& rng) {
         const std::size_t n = static_cast<std::size_t>(rng.integer(2, 12));
         std::vector<Vec2> a, b;
         std::vector<double> w;
         for (std::size_t i = 0; i < n; ++i) {
           a.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
           b.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});  // unrelated sets, reflections likely
           w.push_back(rng.uniform(0.1, 2.0));
         }
         const Mat2 r = match_datasets(a, b, w).rotation.matrix();
         return std::abs(r.det() - 1.0) < kRotationDetTol &&
                std::abs(r.m00 * r.m00 + r.m10 * r.m10 - 1.0) < kRotationDetTol;
       }},
      {"fixed-weight sweep monotone",
       [](TestRng& rng) {
         const auto scene = testing::make_scene(rng, static_cast<std::size_t>(rng.integer(2, 5)),
                                                static_cast<std::size_t>(rng.integer(3, 8)), {10.0, 0.3});
         const auto r = calibrate(scene.observations);
         return std::all_of(r.sweeps.begin(), r.sweeps.end(), [](const SweepTrace& s) {
           return s.costAfter <= s.costBefore * (1.0 + kCostMonotoneRelTol) + 1e-300;
         });
       }},
      {"cost gauge invariant",
       [](TestRng& rng) {
         const auto scene = testing::make_scene(rng, 3, 5, {10.0, 0.3});
         const auto r = calibrate(scene.observations);
         const Pose2 g{Rotation2(rng.uniform(-testing::kPi, testing::kPi)), {rng.uniform(-50, 50), rng.uniform(-50, 50)}};
         const double a = cost(r.estimate, scene.observations);
         const double b = cost(transform_geometry(g, r.estimate), scene.observations);
         return std::abs(a - b) <= kGaugeCostRelTol * std::max(1.0, a);
       }},
      {"conversation graph gauge invariant",
       [](TestRng& rng) {
         const std::size_t n = static_cast<std::size_t>(rng.integer(2, 8));
         std::vector<Pose2> poses;
         for (std::size_t i = 0; i < n; ++i) {
           poses.push_back({Rotation2(rng.uniform(-testing::kPi, testing::kPi)), {rng.uniform(0, 6), rng.uniform(0, 6)}});
         }
         // Skip draws within 1e-9 rad of the interest boundary.
         for (std::size_t i = 0; i < n; ++i) {
           for (std::size_t j = 0; j < n; ++j) {
             if (i == j) continue;
             const Vec2 d = poses[j].translation - poses[i].translation;
             const double off = std::abs(wrap_angle(std::atan2(d.y, d.x) - poses[i].rotation.angle()));
             if (std::abs(off - kInterestHalfAngle) < 1e-9 || norm(d) < 1e-6) return true;
           }
         }
         const Pose2 g{Rotation2(rng.uniform(-testing::kPi, testing::kPi)), {rng.uniform(-20, 20), rng.uniform(-20, 20)}};
         std::vector<Pose2> moved;
         for (const auto& p : poses) moved.push_back(g.compose(p));
         const auto a = build_graph(snapshots_from_poses(poses));
         const auto b = build_graph(snapshots_from_poses(moved));
         return a.interestEdges == b.interestEdges && a.mutualEdges == b.mutualEdges && a.groups == b.groups;
       }},
      {"align_sources partition",
       [](TestRng& rng) {
         const std::size_t dim = 16, speakers = static_cast<std::size_t>(rng.integer(1, 4));
         std::vector<std::vector<double>> voices;
         for (std::size_t s = 0; s < speakers; ++s) {
           std::vector<double> v(dim);
           for (double& x : v) x = rng.normal(1.0);
           voices.push_back(v);
         }
         std::vector<MobileObservation> obs;
         const std::size_t nodes = static_cast<std::size_t>(rng.integer(1, 5));
         for (std::size_t l = 0; l < nodes; ++l) {
           for (std::size_t s = 0; s < speakers; ++s) {
             if (rng.chance(0.2)) continue;
             std::vector<double> v = voices[s];
             for (double& x : v) x += rng.normal(0.3);
             MobileObservation o;
             o.nodeId = l;
             o.embedding = Embedding::normalized(v);
             obs.push_back(o);
           }
         }
         if (obs.empty()) return true;
         const auto diag = align_sources_detailed(obs);
         std::vector<int> covered(obs.size(), 0);
         for (const auto& g : diag.groups) {
           std::set<std::size_t> nodesIn;
           for (const auto& m : g.members) {
             ++covered[m.index];
             if (!nodesIn.insert(m.nodeId).second) return false;  // one observation per node
             if (cosine_similarity(g.representative, obs[m.index].embedding) <= kSameSourceSimilarity) return false;
           }
         }
         if (std::any_of(covered.begin(), covered.end(), [](int c) { return c != 1; })) return false;
         for (const auto& g : align_sources(obs))
           if (g.distinct_nodes() < 2) return false;
         return true;
       }},
      {"allocation budget feasible",
       [](TestRng& rng) {
         auto s = random_streams(rng, 10);
         for (auto& d : s)
           if (rng.chance(0.3)) d.measuredDelayMs = rng.uniform(0.0, 120.0);
         const int budget = rng.integer(0, 800);
         const double threshold = rng.uniform(0.0, 100.0);
         std::vector<AllocationPlan> plans{allocate_bandwidth(s, budget, threshold), allocate_greedy(s, budget, threshold),
                                           allocate_equal_split(s, budget, threshold),
                                           allocate_waterfall(s, budget, threshold)};
         if (s.size() <= kMaxExhaustiveStreams) plans.push_back(allocate_exhaustive(s, budget, threshold));
         for (const auto& p : plans) {
           if (p.total() > budget) return false;
           for (std::size_t i = 0; i < s.size(); ++i) {
             const auto& e = p.entries[i];
             if (e.streamId != s[i].streamId) return false;
             if (std::find(kBandwidthLevels.begin(), kBandwidthLevels.end(), e.level) == kBandwidthLevels.end()) return false;
             if (e.mode == FeatureMode::TimeInvariant && e.level != 0) return false;
           }
         }
         return true;
       }},
  };
  std::string detail;
  bool all = true;
  TestRng rng(9000);
  for (const auto& p : props) {
    int ok = 0;
    for (int c = 0; c < kPropertyCases; ++c) {
      try {
        ok += p.check(rng);
      } catch (const Error&) {
      }
    }
    all = all && ok == kPropertyCases;
    detail += fmt("%s%s %d/%d", detail.empty() ? "" : "; ", p.name, ok, kPropertyCases);
  }
  return {all, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"noiseless static recovery", criterion1},  {"mobile with exact motion", criterion2},
      {"two-node grid oracle", criterion3},       {"observation-count trend", criterion4},
      {"calibration wall time", criterion5},      {"allocation optimality", criterion6},
      {"delay estimation", criterion7},           {"path-loss round trip", criterion8},
      {"invariant suite", criterion9},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
