#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rgbdann {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Plane with unit normal; points x on the plane satisfy normal.dot(x) == offset.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  Plane flipped() const { return {-normal, -offset}; }
  /// Same plane with the normal pointing toward `viewpoint`.
  Plane facing(const Vec3& viewpoint) const {
    return signed_distance(viewpoint) >= 0.0 ? *this : flipped();
  }
};

/// Up-right oriented box. Half extents are along (forward, side, up) where side = up x forward.
struct Cuboid {
  Vec3 center = Vec3::Zero();
  Vec3 up = Vec3::UnitZ();
  Vec3 forward = Vec3::UnitX();
  Vec3 half_extents = Vec3::Constant(0.5);

  Vec3 side() const { return up.cross(forward); }
  Vec3 axis(int k) const { return k == 0 ? forward : (k == 1 ? side() : up); }
  double volume() const { return 8.0 * half_extents.prod(); }
  double base_area() const { return 4.0 * half_extents.x() * half_extents.y(); }
  double height() const { return 2.0 * half_extents.z(); }
  /// Levels are coordinates along `up` (dot products), not heights above a floor.
  double bottom_level() const { return center.dot(up) - half_extents.z(); }
  double top_level() const { return center.dot(up) + half_extents.z(); }

  Vec3 to_local(const Vec3& p) const {
    const Vec3 d = p - center;
    return {d.dot(forward), d.dot(side()), d.dot(up)};
  }
  Vec3 to_world(const Vec3& local) const {
    return center + local.x() * forward + local.y() * side() + local.z() * up;
  }
  /// Corner k has local signs (bit0 -> forward, bit1 -> side, bit2 -> up).
  std::array<Vec3, 8> corners() const;
  bool contains_point(const Vec3& p, double slack = 0.0) const;

  bool operator==(const Cuboid& o) const {
    return center == o.center && up == o.up && forward == o.forward && half_extents == o.half_extents;
  }
};

/// Oriented rectangle in floor coordinates.
struct Rect2 {
  Vec2 center = Vec2::Zero();
  Vec2 axis = Vec2::UnitX();
  Vec2 half_extents = Vec2::Constant(0.5);

  Vec2 perp() const { return {-axis.y(), axis.x()}; }
  double area() const { return 4.0 * half_extents.x() * half_extents.y(); }
  double diagonal() const { return 2.0 * half_extents.norm(); }
  /// Counterclockwise corners.
  std::array<Vec2, 4> corners() const;

  bool operator==(const Rect2&) const = default;
};

/// Right-handed floor coordinate system: e2 = up x e1.
struct FloorFrame {
  Vec3 origin = Vec3::Zero();
  Vec3 up = Vec3::UnitZ();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();

  Vec2 project(const Vec3& p) const {
    const Vec3 d = p - origin;
    return {d.dot(e1), d.dot(e2)};
  }
  double height(const Vec3& p) const { return (p - origin).dot(up); }
  double floor_level() const { return origin.dot(up); }
  Vec3 lift(const Vec2& q, double h) const { return origin + q.x() * e1 + q.y() * e2 + h * up; }
  Vec3 horizontal(const Vec2& dir) const { return dir.x() * e1 + dir.y() * e2; }
  Rect2 footprint(const Cuboid& c) const;

  /// Frame anchored at the floor point closest to `camera`; e1 follows the first
  /// wall normal when one is given, otherwise the camera's viewing axis.
  static FloorFrame make(const Plane& floor, const std::optional<Vec3>& wall_normal,
                         const Vec3& camera = Vec3::Zero());

  bool operator==(const FloorFrame& o) const {
    return origin == o.origin && up == o.up && e1 == o.e1 && e2 == o.e2;
  }
};

struct RansacOptions {
  int iterations = 500;
  double inlier_tol = 0.015;
  std::uint64_t seed = 0;
  // Hypotheses are scored on at most this many points (a seeded subsample).
  std::size_t max_scored_points = 2000;
};

inline RansacOptions plane_ransac_defaults(std::uint64_t seed = 0) { return {500, 0.015, seed}; }
inline RansacOptions line_ransac_defaults(std::uint64_t seed = 0) { return {300, 0.02, seed}; }

struct PlaneFit {
  Plane plane;
  std::vector<std::size_t> inliers;
};

/// Minimum clamp applied to every fitted box extent (full length, meters).
inline constexpr double kMinBoxExtent = 1e-3;

/// Least-squares plane through points (smallest-eigenvector fit).
Plane fit_plane_least_squares(std::span<const Vec3> points);

/// RANSAC plane: max-inlier hypothesis, then least squares on its inliers.
/// The returned normal is canonicalized so that offset >= 0.
PlaneFit fit_plane_ransac(std::span<const Vec3> points, const RansacOptions& opts = plane_ransac_defaults());

/// Minimum |signed distance| of the point set to the plane.
double point_plane_distance(std::span<const Vec3> points, const Plane& plane);

/// Direction of the max-inlier 2D line, refined by PCA over its inliers.
/// Sign: positive x, ties broken toward positive y.
Vec2 fit_line_ransac(std::span<const Vec2> points, const RansacOptions& opts = line_ransac_defaults());

Vec2 canonical_direction(Vec2 d);

/// Counterclockwise hull without collinear vertices.
std::vector<Vec2> convex_hull_2d(std::span<const Vec2> points);

/// Smallest box in the (forward, up x forward, up) frame containing all points.
Cuboid fit_upright_obb(std::span<const Vec3> points, const Vec3& up, const Vec3& forward);

double polygon_area(std::span<const Vec2> polygon);
/// Intersection of two convex counterclockwise polygons.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

double rect_intersection_area(const Rect2& a, const Rect2& b);
bool point_in_rect(const Vec2& p, const Rect2& r);
/// Closest distance between two rectangles (0 when they overlap).
double rect_distance(const Rect2& a, const Rect2& b);

inline constexpr double kContainTolerance = 0.005;
bool cuboid_contains(const Cuboid& outer, const Cuboid& inner, double tol = kContainTolerance);
bool cuboids_intersect(const Cuboid& a, const Cuboid& b);
/// True when origin + t * dir lies in the box for some t in (0, 1].
bool ray_intersects_cuboid(const Vec3& origin, const Vec3& dir, const Cuboid& c);
/// Volumetric IoU of two up-right boxes sharing `up`.
double cuboid_iou(const Cuboid& a, const Cuboid& b);

/// Grow `base` horizontally, keeping its axes and vertical span, to the smallest box
/// whose footprint encloses both its own footprint and `target`.
Cuboid expand_to_enclose(const Cuboid& base, const Rect2& target, const FloorFrame& frame);

/// Same box with its vertical span replaced by [bottom, top] (levels along up).
Cuboid with_vertical_span(const Cuboid& c, double bottom_level, double top_level);

double angle_between_deg(const Vec3& a, const Vec3& b);
/// Angle between undirected lines, in [0, 90].
double line_angle_deg(const Vec3& a, const Vec3& b);

}  // namespace rgbdann
