#include "rgbdann/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "rgbdann/error.hpp"

namespace rgbdann {

namespace {

constexpr double kPi = 3.14159265358979323846;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Indices of a seeded subsample of size min(n, cap), in ascending order.
std::vector<std::size_t> scoring_subset(std::size_t n, std::size_t cap, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= cap) return idx;
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Plane canonical_plane(Plane p) {
  if (p.offset < 0.0) return p.flipped();
  if (p.offset == 0.0) {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(p.normal[k]) > 1e-12) {
        if (p.normal[k] < 0.0) p.normal = -p.normal;
        break;
      }
    }
  }
  return p;
}

// A non-collinear triple, found by farthest-point search; nullopt when degenerate.
std::optional<std::array<std::size_t, 3>> spanning_triple(std::span<const Vec3> pts) {
  if (pts.size() < 3) return std::nullopt;
  std::size_t a = 0, b = 0;
  double best = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = (pts[i] - pts[a]).squaredNorm();
    if (d > best) best = d, b = i;
  }
  if (best < 1e-18) return std::nullopt;
  const Vec3 dir = (pts[b] - pts[a]).normalized();
  std::size_t c = 0;
  double far = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = pts[i] - pts[a];
    const double off = (d - d.dot(dir) * dir).norm();
    if (off > far) far = off, c = i;
  }
  if (far < 1e-9) return std::nullopt;
  return std::array<std::size_t, 3>{a, b, c};
}

std::optional<Plane> plane_through(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len < 1e-12) return std::nullopt;
  Plane p;
  p.normal = n / len;
  p.offset = p.normal.dot(a);
  return p;
}

}  // namespace

std::array<Vec3, 8> Cuboid::corners() const {
  std::array<Vec3, 8> out;
  for (int k = 0; k < 8; ++k) {
    const Vec3 local((k & 1) ? half_extents.x() : -half_extents.x(),
                     (k & 2) ? half_extents.y() : -half_extents.y(),
                     (k & 4) ? half_extents.z() : -half_extents.z());
    out[k] = to_world(local);
  }
  return out;
}

bool Cuboid::contains_point(const Vec3& p, double slack) const {
  const Vec3 l = to_local(p);
  return std::abs(l.x()) <= half_extents.x() + slack && std::abs(l.y()) <= half_extents.y() + slack &&
         std::abs(l.z()) <= half_extents.z() + slack;
}

std::array<Vec2, 4> Rect2::corners() const {
  const Vec2 u = axis * half_extents.x();
  const Vec2 v = perp() * half_extents.y();
  return {center - u - v, center + u - v, center + u + v, center - u + v};
}

Rect2 FloorFrame::footprint(const Cuboid& c) const {
  Rect2 r;
  r.center = project(c.center);
  const Vec2 a(c.forward.dot(e1), c.forward.dot(e2));
  r.axis = a.norm() > 1e-12 ? Vec2(a.normalized()) : Vec2(Vec2::UnitX());
  r.half_extents = Vec2(c.half_extents.x(), c.half_extents.y());
  return r;
}

FloorFrame FloorFrame::make(const Plane& floor, const std::optional<Vec3>& wall_normal, const Vec3& camera) {
  FloorFrame f;
  f.up = floor.normal.normalized();
  f.origin = camera - floor.signed_distance(camera) * f.up;
  auto in_plane = [&](const Vec3& v) -> std::optional<Vec3> {
    const Vec3 h = v - v.dot(f.up) * f.up;
    if (h.norm() < 1e-6) return std::nullopt;
    return h.normalized();
  };
  std::optional<Vec3> e1;
  if (wall_normal) e1 = in_plane(*wall_normal);
  if (!e1) e1 = in_plane(Vec3::UnitZ());
  if (!e1) e1 = in_plane(Vec3::UnitX());
  f.e1 = *e1;
  f.e2 = f.up.cross(f.e1);
  return f;
}

Plane fit_plane_least_squares(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error(Errc::degenerate, "plane fit needs at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Plane p;
  p.normal = eig.eigenvectors().col(0).normalized();
  p.offset = p.normal.dot(centroid);
  return p;
}

PlaneFit fit_plane_ransac(std::span<const Vec3> points, const RansacOptions& opts) {
  const auto triple = spanning_triple(points);
  if (!triple) throw Error(Errc::degenerate, "points are collinear or fewer than 3");

  std::mt19937_64 rng(opts.seed);
  const auto scored = scoring_subset(points.size(), std::max<std::size_t>(opts.max_scored_points, 3), rng);
  auto count_inliers = [&](const Plane& h) {
    std::size_t n = 0;
    for (std::size_t i : scored)
      if (std::abs(h.signed_distance(points[i])) <= opts.inlier_tol) ++n;
    return n;
  };

  Plane best = *plane_through(points[(*triple)[0]], points[(*triple)[1]], points[(*triple)[2]]);
  std::size_t best_count = count_inliers(best);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  for (int it = 0; it < opts.iterations; ++it) {
    const std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
    if (i == j || j == k || i == k) continue;
    const auto h = plane_through(points[i], points[j], points[k]);
    if (!h) continue;
    const std::size_t c = count_inliers(*h);
    if (c > best_count) best = *h, best_count = c;
  }

  PlaneFit fit;
  std::vector<Vec3> inlier_pts;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::abs(best.signed_distance(points[i])) <= opts.inlier_tol) {
      fit.inliers.push_back(i);
      inlier_pts.push_back(points[i]);
    }
  }
  fit.plane = best;
  if (inlier_pts.size() >= 3 && spanning_triple(inlier_pts)) fit.plane = fit_plane_least_squares(inlier_pts);
  fit.plane = canonical_plane(fit.plane);
  return fit;
}

double point_plane_distance(std::span<const Vec3> points, const Plane& plane) {
  if (points.empty()) throw Error(Errc::empty_input, "point_plane_distance on an empty set");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) best = std::min(best, std::abs(plane.signed_distance(p)));
  return best;
}

Vec2 canonical_direction(Vec2 d) {
  d.normalize();
  if (d.x() < -1e-12 || (std::abs(d.x()) <= 1e-12 && d.y() < 0.0)) d = -d;
  return d;
}

Vec2 fit_line_ransac(std::span<const Vec2> points, const RansacOptions& opts) {
  // Farthest pair from the first point gives a deterministic fallback hypothesis.
  if (points.size() < 2) throw Error(Errc::degenerate, "line fit needs at least 2 points");
  std::size_t far = 0;
  double far_d = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = (points[i] - points[0]).squaredNorm();
    if (d > far_d) far_d = d, far = i;
  }
  if (far_d < 1e-18) throw Error(Errc::degenerate, "line fit needs two distinct points");

  std::mt19937_64 rng(opts.seed);
  const auto scored = scoring_subset(points.size(), std::max<std::size_t>(opts.max_scored_points, 2), rng);
  auto count_inliers = [&](const Vec2& p0, const Vec2& dir) {
    std::size_t n = 0;
    for (std::size_t i : scored)
      if (std::abs(cross2(dir, points[i] - p0)) <= opts.inlier_tol) ++n;
    return n;
  };

  Vec2 best_p = points[0];
  Vec2 best_dir = (points[far] - points[0]).normalized();
  std::size_t best_count = count_inliers(best_p, best_dir);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  for (int it = 0; it < opts.iterations; ++it) {
    const std::size_t i = pick(rng), j = pick(rng);
    const Vec2 d = points[j] - points[i];
    if (i == j || d.squaredNorm() < 1e-18) continue;
    const Vec2 dir = d.normalized();
    const std::size_t c = count_inliers(points[i], dir);
    if (c > best_count) best_p = points[i], best_dir = dir, best_count = c;
  }

  // PCA refinement on the inliers of the winning hypothesis.
  Vec2 mean = Vec2::Zero();
  std::size_t n = 0;
  for (const auto& p : points) {
    if (std::abs(cross2(best_dir, p - best_p)) <= opts.inlier_tol) mean += p, ++n;
  }
  if (n >= 2) {
    mean /= static_cast<double>(n);
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : points) {
      if (std::abs(cross2(best_dir, p - best_p)) <= opts.inlier_tol) cov += (p - mean) * (p - mean).transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    if (eig.eigenvalues()(1) > 1e-18) best_dir = eig.eigenvectors().col(1);
  }
  return canonical_direction(best_dir);
}

std::vector<Vec2> convex_hull_2d(std::span<const Vec2> points) {
  std::vector<Vec2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) throw Error(Errc::degenerate, "hull needs at least 3 distinct points");

  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (k >= lower && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw Error(Errc::degenerate, "all points are collinear");
  return hull;
}

Cuboid fit_upright_obb(std::span<const Vec3> points, const Vec3& up, const Vec3& forward) {
  if (points.empty()) throw Error(Errc::empty_input, "fit_upright_obb on an empty set");
  Cuboid c;
  c.up = up.normalized();
  c.forward = (forward - forward.dot(c.up) * c.up).normalized();
  const Vec3 axes[3] = {c.forward, c.side(), c.up};
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : points) {
    for (int k = 0; k < 3; ++k) {
      const double v = p.dot(axes[k]);
      lo[k] = std::min(lo[k], v);
      hi[k] = std::max(hi[k], v);
    }
  }
  c.center = Vec3::Zero();
  for (int k = 0; k < 3; ++k) {
    c.center += 0.5 * (lo[k] + hi[k]) * axes[k];
    c.half_extents[k] = std::max(0.5 * (hi[k] - lo[k]), 0.5 * kMinBoxExtent);
  }
  return c;
}

double polygon_area(std::span<const Vec2> polygon) {
  double a = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) a += cross2(polygon[i], polygon[(i + 1) % polygon.size()]);
  return 0.5 * a;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % clip.size()];
    const Vec2 edge = b - a;
    std::vector<Vec2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % in.size()];
      const double sp = cross2(edge, p - a);
      const double sq = cross2(edge, q - a);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
  }
  return out;
}

double rect_intersection_area(const Rect2& a, const Rect2& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const auto poly = clip_convex(ca, cb);
  if (poly.size() < 3) return 0.0;
  return std::clamp(polygon_area(poly), 0.0, std::min(a.area(), b.area()));
}

bool point_in_rect(const Vec2& p, const Rect2& r) {
  const Vec2 d = p - r.center;
  constexpr double eps = 1e-12;
  return std::abs(d.dot(r.axis)) <= r.half_extents.x() + eps && std::abs(d.dot(r.perp())) <= r.half_extents.y() + eps;
}

namespace {
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}
}  // namespace

double rect_distance(const Rect2& a, const Rect2& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  if (clip_convex(ca, cb).size() >= 3) return 0.0;
  for (const auto& p : ca)
    if (point_in_rect(p, b)) return 0.0;
  for (const auto& p : cb)
    if (point_in_rect(p, a)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, point_segment_distance(ca[i], cb[j], cb[(j + 1) % 4]));
      best = std::min(best, point_segment_distance(cb[j], ca[i], ca[(i + 1) % 4]));
    }
  }
  return best;
}

bool cuboid_contains(const Cuboid& outer, const Cuboid& inner, double tol) {
  for (const auto& p : inner.corners())
    if (!outer.contains_point(p, tol)) return false;
  return true;
}

bool cuboids_intersect(const Cuboid& a, const Cuboid& b) {
  constexpr double eps = 1e-12;
  // Vertical overlap along a's up.
  double blo = std::numeric_limits<double>::infinity(), bhi = -blo;
  for (const auto& p : b.corners()) {
    blo = std::min(blo, p.dot(a.up));
    bhi = std::max(bhi, p.dot(a.up));
  }
  if (bhi < a.bottom_level() - eps || blo > a.top_level() + eps) return false;

  // Separating axes in the horizontal plane of a.
  const Vec3 f = a.forward, s = a.side();
  auto to2 = [&](const Vec3& p) { return Vec2((p - a.center).dot(f), (p - a.center).dot(s)); };
  std::array<Vec2, 4> pa, pb;
  {
    const auto c = a.corners();
    const auto d = b.corners();
    for (int k = 0; k < 4; ++k) pa[k] = to2(c[k]), pb[k] = to2(d[k]);
  }
  const Vec2 bf(b.forward.dot(f), b.forward.dot(s));
  const std::array<Vec2, 4> axes = {Vec2::UnitX(), Vec2::UnitY(), bf, Vec2(-bf.y(), bf.x())};
  for (const auto& ax : axes) {
    if (ax.squaredNorm() < 1e-18) continue;
    double alo = std::numeric_limits<double>::infinity(), ahi = -alo, lo = alo, hi = -alo;
    for (int k = 0; k < 4; ++k) {
      alo = std::min(alo, pa[k].dot(ax));
      ahi = std::max(ahi, pa[k].dot(ax));
      lo = std::min(lo, pb[k].dot(ax));
      hi = std::max(hi, pb[k].dot(ax));
    }
    if (hi < alo - eps || lo > ahi + eps) return false;
  }
  return true;
}

bool ray_intersects_cuboid(const Vec3& origin, const Vec3& dir, const Cuboid& c) {
  const Vec3 o = c.to_local(origin);
  const Vec3 d(dir.dot(c.forward), dir.dot(c.side()), dir.dot(c.up));
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double h = c.half_extents[k];
    if (std::abs(d[k]) < 1e-15) {
      if (std::abs(o[k]) > h) return false;
      continue;
    }
    double t1 = (-h - o[k]) / d[k];
    double t2 = (h - o[k]) / d[k];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return false;
  }
  return tmax > 0.0 && tmin <= 1.0;
}

double cuboid_iou(const Cuboid& a, const Cuboid& b) {
  const double lo = std::max(a.bottom_level(), b.bottom_level());
  const double hi = std::min(a.top_level(), b.top_level());
  if (hi <= lo) return 0.0;
  FloorFrame f;
  f.origin = a.center;
  f.up = a.up;
  f.e1 = a.forward;
  f.e2 = a.side();
  const double inter = rect_intersection_area(f.footprint(a), f.footprint(b)) * (hi - lo);
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Cuboid expand_to_enclose(const Cuboid& base, const Rect2& target, const FloorFrame& frame) {
  const Vec3 f = base.forward, s = base.side();
  double lo_f = -base.half_extents.x(), hi_f = base.half_extents.x();
  double lo_s = -base.half_extents.y(), hi_s = base.half_extents.y();
  const double h = frame.height(base.center);
  for (const auto& q : target.corners()) {
    const Vec3 d = frame.lift(q, h) - base.center;
    lo_f = std::min(lo_f, d.dot(f));
    hi_f = std::max(hi_f, d.dot(f));
    lo_s = std::min(lo_s, d.dot(s));
    hi_s = std::max(hi_s, d.dot(s));
  }
  Cuboid out = base;
  out.center = base.center + 0.5 * (lo_f + hi_f) * f + 0.5 * (lo_s + hi_s) * s;
  out.half_extents.x() = 0.5 * (hi_f - lo_f);
  out.half_extents.y() = 0.5 * (hi_s - lo_s);
  return out;
}

Cuboid with_vertical_span(const Cuboid& c, double bottom_level, double top_level) {
  Cuboid out = c;
  const double mid = 0.5 * (bottom_level + top_level);
  out.center = c.center + (mid - c.center.dot(c.up)) * c.up;
  out.half_extents.z() = std::max(0.5 * (top_level - bottom_level), 0.5 * kMinBoxExtent);
  return out;
}

double angle_between_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / kPi;
}

double line_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return std::acos(c) * 180.0 / kPi;
}

}  // namespace rgbdann
