#include <gtest/gtest.h>

#include <cmath>

#include "earnet/conversation.hpp"
#include "earnet/error.hpp"
#include "test_support.hpp"

namespace earnet {
namespace {

using testing::kPi;
using testing::TestRng;

NodePoseSnapshot at(std::size_t id, double x, double y, double o) { return {id, {x, y}, o}; }

double facing(const Vec2& from, const Vec2& to) { return std::atan2(to.y - from.y, to.x - from.x); }

TEST(Interest, Examples) {
  EXPECT_TRUE(interest(at(0, 0, 0, 0), at(1, 1, 0, 0)));
  EXPECT_FALSE(interest(at(0, 0, 0, 0), at(1, 0, 1, 0)));
}

TEST(Interest, BoundaryIsExclusive) {
  // Bearing pi/4 from an observer facing 0; the computed bearing equals the
  // constant exactly.
  const auto i = at(0, 0, 0, 0);
  const auto j = at(1, 1, 1, 0);
  ASSERT_EQ(std::atan2(1.0, 1.0), kInterestHalfAngle);
  EXPECT_FALSE(interest(i, j));
  EXPECT_TRUE(interest(at(0, 0, 0, 1e-9), j));
  EXPECT_FALSE(interest(at(0, 0, 0, 2 * kInterestHalfAngle), j));
}

TEST(Interest, WrapsAroundPi) {
  EXPECT_TRUE(interest(at(0, 0, 0, kPi), at(1, -1, 0.01, 0)));
  EXPECT_TRUE(interest(at(0, 0, 0, -kPi + 0.01), at(1, -1, -0.01, 0)));
}

TEST(Interest, CoincidentPositions) {
  try {
    interest(at(0, 1, 1, 0), at(1, 1, 1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CoincidentPositions);
  }
}

TEST(BuildGraph, TwoFacingNodes) {
  const std::vector<NodePoseSnapshot> s{at(1, 0, 0, 0), at(2, 1, 0, kPi)};
  const auto g = build_graph(s);
  ASSERT_EQ(g.groups.size(), 1u);
  EXPECT_EQ(g.groups[0], (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(g.mutualEdges, (std::vector<Edge>{{1, 2}}));
}

TEST(BuildGraph, OneSidedInterestStaysAlone) {
  // A looks at B; B and C look at each other.
  const Vec2 a{0, 4}, b{2, 0}, c{4, 1};
  const std::vector<NodePoseSnapshot> s{{0, a, facing(a, b)}, {1, b, facing(b, c)}, {2, c, facing(c, b)}};
  const auto g = build_graph(s);
  EXPECT_EQ(g.groups, (std::vector<std::vector<std::size_t>>{{0}, {1, 2}}));
  EXPECT_EQ(g.mutualEdges, (std::vector<Edge>{{1, 2}}));
  // Hand-checked: A->C is 26.6 deg off A's heading, C->A 63.4 deg off C's, B->A 90.
  EXPECT_EQ(g.interestEdges, (std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}, {2, 1}}));
}

TEST(BuildGraph, TwoSeparatedPairs) {
  const Vec2 p0{0, 0}, p1{1.2, 0}, p2{8, 5}, p3{8, 6.2};
  const std::vector<NodePoseSnapshot> s{
      {0, p0, facing(p0, p1)}, {1, p1, facing(p1, p0)}, {2, p2, facing(p2, p3)}, {3, p3, facing(p3, p2)}};
  const auto g = build_graph(s);
  EXPECT_EQ(g.groups, (std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}}));
  // Exhaustive pairwise check against the component result.
  for (const auto& a : s)
    for (const auto& b : s)
      if (a.nodeId != b.nodeId) {
        const bool sameGroup = (a.nodeId < 2) == (b.nodeId < 2);
        EXPECT_EQ(interest(a, b) && interest(b, a), sameGroup);
      }
}

std::vector<NodePoseSnapshot> random_snapshots(TestRng& rng, std::size_t n) {
  std::vector<NodePoseSnapshot> s;
  for (std::size_t i = 0; i < n; ++i)
    s.push_back({i, {rng.uniform(0, 10), rng.uniform(0, 10)}, rng.uniform(-kPi, kPi)});
  return s;
}

double min_boundary_margin(const std::vector<NodePoseSnapshot>& s) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& a : s)
    for (const auto& b : s)
      if (a.nodeId != b.nodeId) {
        const double rel = std::abs(wrap_angle(facing(a.position, b.position) - a.orientation));
        m = std::min(m, std::abs(rel - kInterestHalfAngle));
      }
  return m;
}

TEST(BuildGraph, GaugeInvariant) {
  TestRng rng(50);
  int checked = 0;
  while (checked < 1000) {
    auto s = random_snapshots(rng, static_cast<std::size_t>(rng.integer(2, 7)));
    if (min_boundary_margin(s) < 1e-9) continue;
    ++checked;
    const Pose2 t{Rotation2(rng.uniform(-kPi, kPi)), {rng.uniform(-50, 50), rng.uniform(-50, 50)}};
    auto moved = s;
    for (auto& n : moved) {
      n.position = t.apply(n.position);
      n.orientation = wrap_angle(n.orientation + t.rotation.angle());
    }
    const auto a = build_graph(s), b = build_graph(moved);
    EXPECT_EQ(a.interestEdges, b.interestEdges);
    EXPECT_EQ(a.mutualEdges, b.mutualEdges);
    EXPECT_EQ(a.groups, b.groups);
  }
}

TEST(BuildGraph, StructuralProperties) {
  TestRng rng(51);
  for (int t = 0; t < 1000; ++t) {
    const auto s = random_snapshots(rng, static_cast<std::size_t>(rng.integer(1, 8)));
    const auto g = build_graph(s);
    for (const auto& [i, j] : g.mutualEdges) {
      EXPECT_TRUE(interest(s[i], s[j]));
      EXPECT_TRUE(interest(s[j], s[i]));
    }
    std::vector<int> count(s.size(), 0);
    std::vector<std::size_t> groupOf(s.size());
    for (std::size_t k = 0; k < g.groups.size(); ++k)
      for (auto id : g.groups[k]) {
        ++count[id];
        groupOf[id] = k;
      }
    for (int c : count) EXPECT_EQ(c, 1);
    for (const auto& [i, j] : g.mutualEdges) EXPECT_EQ(groupOf[i], groupOf[j]);
  }
}

// Forcing an extra mutual edge (turning two nodes toward each other) never
// splits an existing group.
TEST(BuildGraph, AddingMutualEdgeNeverSplits) {
  TestRng rng(52);
  for (int t = 0; t < 1000; ++t) {
    auto s = random_snapshots(rng, 6);
    const auto before = build_graph(s);
    // Pick a node outside every mutual edge so reorienting it removes nothing.
    std::vector<bool> used(s.size(), false);
    for (const auto& [i, j] : before.mutualEdges) used[i] = used[j] = true;
    std::size_t a = s.size(), b = s.size();
    for (std::size_t i = 0; i < s.size() && b == s.size(); ++i)
      if (!used[i]) (a == s.size() ? a : b) = i;
    if (b == s.size()) continue;
    s[a].orientation = facing(s[a].position, s[b].position);
    s[b].orientation = facing(s[b].position, s[a].position);
    const auto after = build_graph(s);
    for (const auto& group : before.groups) {
      const auto& home = *std::find_if(after.groups.begin(), after.groups.end(), [&](const auto& g) {
        return std::find(g.begin(), g.end(), group.front()) != g.end();
      });
      for (auto id : group) EXPECT_NE(std::find(home.begin(), home.end(), id), home.end());
    }
  }
}

TEST(Evaluate, Examples) {
  TestRng rng(60);
  const auto truth = random_snapshots(rng, 5);
  const auto same = evaluate(truth, truth);
  EXPECT_EQ(same.setupAccuracy, 1.0);
  EXPECT_EQ(same.orientationErrorDeg, 0.0);
  EXPECT_EQ(same.positionErrorM, 0.0);

  auto turned = truth;
  for (auto& n : turned) n.orientation = wrap_angle(n.orientation + 10.0 * kPi / 180.0);
  EXPECT_NEAR(evaluate(turned, truth).orientationErrorDeg, 10.0, 1e-9);
  EXPECT_EQ(evaluate(turned, truth).positionErrorM, 0.0);
}

TEST(Evaluate, AccuracyCountsOrderedPairs) {
  const std::vector<NodePoseSnapshot> truth{at(0, 0, 0, 0), at(1, 1, 0, kPi), at(2, 0, 5, 0)};
  auto est = truth;
  est[0].orientation = kPi;  // loses 0->1, nothing else changes
  EXPECT_NEAR(evaluate(est, truth).setupAccuracy, 5.0 / 6.0, 1e-15);
}

TEST(Evaluate, IdMismatch) {
  const std::vector<NodePoseSnapshot> truth{at(0, 0, 0, 0), at(1, 1, 0, 0)};
  const std::vector<NodePoseSnapshot> wrong{at(0, 0, 0, 0), at(7, 1, 0, 0)};
  const std::vector<NodePoseSnapshot> shorter{at(0, 0, 0, 0)};
  for (const auto* e : {&wrong, &shorter}) {
    try {
      evaluate(*e, truth);
      FAIL();
    } catch (const Error& err) {
      EXPECT_EQ(err.code(), ErrorCode::IdMismatch);
    }
  }
}

TEST(Evaluate, MissingEstimatesPredictNoInterest) {
  const std::vector<NodePoseSnapshot> truth{at(0, 0, 0, 0), at(1, 1, 0, kPi), at(2, 0, 5, 0)};
  const std::vector<NodePoseSnapshot> partial{truth[0], truth[2]};
  EXPECT_NEAR(setup_accuracy(partial, truth), 4.0 / 6.0, 1e-15);
}

}  // namespace
}  // namespace earnet
