#pragma once

// Planar rigid-body primitives and dataset-matching geometry calibration.
//
// Every node l observes a subset of the sources k in its own local frame.
// Calibration recovers each node's pose (R_l, n_l) together with the global
// source positions s_k by alternating between weighted Procrustes fits of
// the nodes and closed-form weighted means of the sources.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace earnet {

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians) noexcept;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o) noexcept {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) noexcept {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) noexcept {
    x *= s;
    y *= s;
    return *this;
  }

  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) noexcept { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) noexcept { return a -= b; }
  friend constexpr Vec2 operator-(const Vec2& a) noexcept { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) noexcept { return a *= s; }
  friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return a *= s; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) noexcept { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) noexcept { return a.x * b.y - a.y * b.x; }
constexpr double squared_norm(const Vec2& v) noexcept { return dot(v, v); }
inline double norm(const Vec2& v) noexcept { return std::hypot(v.x, v.y); }
inline bool is_finite(const Vec2& v) noexcept { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Row-major 2x2 matrix.
struct Mat2 {
  double m00 = 0.0, m01 = 0.0;
  double m10 = 0.0, m11 = 0.0;

  static constexpr Mat2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }

  constexpr double det() const noexcept { return m00 * m11 - m01 * m10; }
  constexpr Mat2 transposed() const noexcept { return {m00, m10, m01, m11}; }

  friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b) noexcept {
    return {a.m00 * b.m00 + a.m01 * b.m10, a.m00 * b.m01 + a.m01 * b.m11,
            a.m10 * b.m00 + a.m11 * b.m10, a.m10 * b.m01 + a.m11 * b.m11};
  }
  friend constexpr Vec2 operator*(const Mat2& a, const Vec2& v) noexcept {
    return {a.m00 * v.x + a.m01 * v.y, a.m10 * v.x + a.m11 * v.y};
  }
  friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

/// Proper planar rotation stored by its angle in (-pi, pi].
class Rotation2 {
 public:
  constexpr Rotation2() noexcept = default;
  explicit Rotation2(double radians) noexcept : angle_(wrap_angle(radians)) {}

  /// Extracts atan2(R10, R00). The input is assumed to be a proper rotation.
  static Rotation2 from_matrix(const Mat2& r) noexcept { return Rotation2(std::atan2(r.m10, r.m00)); }

  double angle() const noexcept { return angle_; }
  Mat2 matrix() const noexcept {
    const double c = std::cos(angle_);
    const double s = std::sin(angle_);
    return {c, -s, s, c};
  }

  Vec2 apply(const Vec2& v) const noexcept { return matrix() * v; }
  Rotation2 inverse() const noexcept { return Rotation2(-angle_); }

  friend Rotation2 operator*(const Rotation2& a, const Rotation2& b) noexcept {
    return Rotation2(a.angle_ + b.angle_);
  }

 private:
  double angle_ = 0.0;
};

/// Rigid transform x -> R x + n.
struct Pose2 {
  Rotation2 rotation;
  Vec2 translation;

  static Pose2 identity() noexcept { return {}; }

  Vec2 apply(const Vec2& local) const noexcept { return rotation.apply(local) + translation; }

  /// (this * other)(x) == this(other(x)).
  Pose2 compose(const Pose2& other) const noexcept {
    return {rotation * other.rotation, rotation.apply(other.translation) + translation};
  }

  Pose2 inverse() const noexcept {
    const Rotation2 inv = rotation.inverse();
    return {inv, -inv.apply(translation)};
  }
};

struct PolarObservation {
  double azimuth = 0.0;   // radians, node-local frame
  double distance = 0.0;  // meters
  double weight = 1.0;
};

/// Singular value decomposition M = U * diag(s0, s1) * V^T with s0 >= s1 >= 0.
struct Svd2 {
  Mat2 u;
  double s0 = 0.0;
  double s1 = 0.0;
  Mat2 v;
};

/// Closed-form 2x2 SVD via the rotation-scale-rotation decomposition.
Svd2 svd(const Mat2& m) noexcept;

/// One local observation of source `source` by node `node`.
struct SourceObservation {
  std::size_t node = 0;
  std::size_t source = 0;
  Vec2 local;
  double weight = 1.0;  // prior weight; multiplied with residual weights during calibration
};

struct GeometryEstimate {
  std::vector<Pose2> nodePoses;
  std::vector<Vec2> sourcePositions;
  double finalCost = 0.0;
};

Vec2 polar_to_local(const PolarObservation& obs) noexcept;

Vec2 weighted_centroid(std::span<const Vec2> points, std::span<const double> weights);

/// Weighted cross-covariance (1/K) * sum_i w_i (l_i - lbar)(g_i - gbar)^T of centered points.
Mat2 dispersion_matrix(std::span<const Vec2> localPts, std::span<const Vec2> globalPts,
                       std::span<const double> weights);

/// Weighted Procrustes fit: the proper pose minimizing sum w_i |g_i - (R l_i + n)|^2.
Pose2 match_datasets(std::span<const Vec2> localPts, std::span<const Vec2> globalPts,
                     std::span<const double> weights);

inline Vec2 project_observation(const Pose2& pose, const Vec2& localPt) noexcept { return pose.apply(localPt); }

Vec2 estimate_source(std::span<const Vec2> projections, std::span<const double> weights);

inline constexpr double kResidualEpsilon = 1e-6;  // m^2

/// w = 1 / (eps + r^2) for every observation, r being its projection residual.
std::vector<double> residual_weights(const GeometryEstimate& geometry,
                                     std::span<const SourceObservation> observations,
                                     double epsilon = kResidualEpsilon);

/// sum_i w_i |s_k(i) - (R_l(i) local_i + n_l(i))|^2
double cost(const GeometryEstimate& geometry, std::span<const SourceObservation> observations,
            std::span<const double> weights);

/// Same as above with each observation's own prior weight.
double cost(const GeometryEstimate& geometry, std::span<const SourceObservation> observations);

struct CalibrationOptions {
  int maxIterations = 100;
  double relativeTolerance = 1e-9;
  double residualEpsilon = kResidualEpsilon;
  bool refreshResidualWeights = true;
  // Converge under the prior weights before the first residual refresh, so
  // that reweighting starts from the least-squares fit rather than from the
  // initial guess.
  bool priorWeightWarmup = true;
  // Warm start. Re-gauged internally so that node 0 sits at the identity.
  std::optional<std::vector<Pose2>> initialPoses;
};

/// Cost before and after one alternating sweep, both under the sweep's fixed weights.
struct SweepTrace {
  double costBefore = 0.0;
  double costAfter = 0.0;
};

struct CalibrationResult {
  GeometryEstimate estimate;
  std::vector<double> weights;  // combined weights of the final sweep, per observation
  int iterations = 0;
  bool converged = false;
  double initialPriorCost = 0.0;  // initialization, prior weights only
  double finalPriorCost = 0.0;    // result, prior weights only
  std::vector<SweepTrace> sweeps;
};

/// Alternating dataset-matching calibration. Node 0 is the gauge anchor.
/// Node and source ids must be dense in [0, L) and [0, K).
CalibrationResult calibrate(std::span<const SourceObservation> observations,
                            const CalibrationOptions& options = {});

/// Convenience overload: `perNode[l]` lists (source id, polar observation) pairs.
struct IndexedPolar {
  std::size_t source = 0;
  PolarObservation obs;
};
CalibrationResult calibrate(const std::vector<std::vector<IndexedPolar>>& perNode,
                            const CalibrationOptions& options = {});

/// Rigid transform taking `estimated` node positions onto `reference` ones (unit weights).
Pose2 gauge_transform(std::span<const Vec2> estimated, std::span<const Vec2> reference);

/// Applies `t` on the left of every pose and to every source position.
GeometryEstimate transform_geometry(const Pose2& t, const GeometryEstimate& geometry);

GeometryEstimate gauge_align(const GeometryEstimate& estimate, const GeometryEstimate& reference);

}  // namespace earnet
