#include "rgbdann/scene_parse.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rgbdann/error.hpp"

namespace rgbdann {
namespace {

double cos_deg(double deg) { return std::cos(deg * std::numbers::pi / 180.0); }

double percentile_level(const std::vector<Vec3>& pts, const Vec3& up, double q) {
  std::vector<double> h;
  h.reserve(pts.size());
  for (const Vec3& p : pts) h.push_back(p.dot(up));
  const std::size_t k = std::min(h.size() - 1, static_cast<std::size_t>(q * static_cast<double>(h.size())));
  std::nth_element(h.begin(), h.begin() + static_cast<long>(k), h.end());
  return h[k];
}

bool allowed(const std::vector<char>& eligible, std::size_t i) { return eligible.empty() || eligible[i]; }

/// A merged set behaves like one big segment for the coplanarity test.
struct Group {
  Plane plane;
  std::vector<int> members;
  std::vector<Vec3> points;
};

bool coplanar_with_group(const Segment& s, const Group& g, const ParseConfig& cfg) {
  if (!s.plane || s.points.empty()) return false;
  if (line_angle_deg(s.plane->normal, g.plane.normal) > cfg.angle_tol_deg) return false;
  return std::min(point_plane_distance(s.points, g.plane), point_plane_distance(g.points, *s.plane)) <= cfg.dist_tol;
}

/// Iterative coplanar merge with a RANSAC refit each round until nothing joins.
Group grow(std::span<const Segment> segments, int seed, const std::vector<char>& pool, const Vec3& camera,
           const ParseConfig& cfg) {
  Group g;
  g.members = {seed};
  g.points = segments[seed].points;
  g.plane = *segments[seed].plane;
  std::vector<char> in(segments.size(), 0);
  in[seed] = 1;
  for (std::size_t round = 0; round < segments.size(); ++round) {
    std::vector<int> joined;
    for (std::size_t i = 0; i < segments.size(); ++i)
      if (!in[i] && pool[i] && coplanar_with_group(segments[i], g, cfg)) joined.push_back(static_cast<int>(i));
    if (joined.empty()) break;
    for (int i : joined) {
      in[i] = 1;
      g.members.push_back(i);
      g.points.insert(g.points.end(), segments[i].points.begin(), segments[i].points.end());
    }
    g.plane = fit_plane_ransac(g.points, cfg.plane_ransac).plane.facing(camera);
  }
  std::sort(g.members.begin(), g.members.end());
  return g;
}

}  // namespace

bool coplanar(const Segment& si, const Segment& sj, const ParseConfig& cfg) {
  if (!si.plane || !sj.plane || si.points.empty() || sj.points.empty()) return false;
  if (line_angle_deg(si.plane->normal, sj.plane->normal) > cfg.angle_tol_deg) return false;
  return std::min(point_plane_distance(si.points, *sj.plane), point_plane_distance(sj.points, *si.plane)) <=
         cfg.dist_tol;
}

FloorFit extract_floor(std::span<const Segment> segments, const Vec3& gravity, const ParseConfig& cfg,
                       const std::vector<char>& eligible) {
  const Vec3 up = -gravity.normalized();
  const double min_cos = cos_deg(cfg.angle_tol_deg);
  int seed = -1;
  double seed_level = 0.0;
  std::vector<char> pool(segments.size(), 0);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    if (!allowed(eligible, i) || !s.plane || s.points.size() < 3) continue;
    pool[i] = 1;
    if (s.plane->normal.dot(up) < min_cos) continue;
    const double level = percentile_level(s.points, up, cfg.seed_percentile);
    if (seed < 0 || level < seed_level) {
      seed = static_cast<int>(i);
      seed_level = level;
    }
  }
  if (seed < 0) throw Error(Errc::no_floor, "no segment within the angle tolerance of the gravity direction");
  // The camera sits above the floor, so facing the origin orients the normal up.
  Group g = grow(segments, seed, pool, Vec3::Zero(), cfg);
  Plane plane = g.plane;
  if (plane.normal.dot(up) < 0.0) plane = plane.flipped();
  return {plane, g.members};
}

FloorFit floor_from_seed(std::span<const Segment> segments, int seed, const Vec3& gravity, const ParseConfig& cfg,
                         const std::vector<char>& eligible) {
  if (seed < 0 || static_cast<std::size_t>(seed) >= segments.size() || !segments[seed].plane)
    throw Error(Errc::invariant_violation, "floor seed is not a planar segment");
  std::vector<char> pool(segments.size(), 0);
  for (std::size_t i = 0; i < segments.size(); ++i)
    pool[i] = allowed(eligible, i) && segments[i].plane && segments[i].points.size() >= 3;
  Group g = grow(segments, seed, pool, Vec3::Zero(), cfg);
  Plane plane = g.plane;
  if (plane.normal.dot(-gravity) < 0.0) plane = plane.flipped();
  return {plane, g.members};
}

Wall wall_from_seed(std::span<const Segment> segments, int seed, const FloorFit& floor, const ParseConfig& cfg,
                    const std::vector<char>& eligible) {
  if (seed < 0 || static_cast<std::size_t>(seed) >= segments.size() || !segments[seed].plane)
    throw Error(Errc::invariant_violation, "wall seed is not a planar segment");
  std::vector<char> pool(segments.size(), 0);
  for (std::size_t i = 0; i < segments.size(); ++i)
    pool[i] = allowed(eligible, i) && segments[i].plane && segments[i].points.size() >= 3;
  for (int i : floor.segments) pool[i] = 0;
  pool[seed] = 1;
  Group g = grow(segments, seed, pool, Vec3::Zero(), cfg);
  return {g.plane, g.members};
}

double score_wall_pair(const Vec3& n1, const Vec3& n2, std::span<const Vec3> candidate_normals) {
  double score = 0.0;
  for (const Vec3& n : candidate_normals) {
    const double a = n.dot(n1), b = n.dot(n2);
    score += std::exp(-a * a) + std::exp(-b * b);
  }
  return score;
}

std::vector<Wall> extract_walls(std::span<const Segment> segments, const FloorFit& floor, const ParseConfig& cfg,
                                const std::vector<char>& eligible, std::vector<std::string>* warnings) {
  const Vec3& up = floor.plane.normal;
  const double max_vertical = cos_deg(90.0 - cfg.angle_tol_deg);
  std::vector<char> pool(segments.size(), 0), floor_member(segments.size(), 0);
  for (int i : floor.segments) floor_member[i] = 1;
  std::vector<int> wall_like;
  std::vector<Vec3> candidate_normals;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    if (!allowed(eligible, i) || floor_member[i] || !s.plane || s.points.size() < 3) continue;
    pool[i] = 1;
    if (std::abs(s.plane->normal.dot(up)) > max_vertical || s.points.size() < cfg.min_wall_points) continue;
    wall_like.push_back(static_cast<int>(i));
    for (const Vec3& n : s.point_normals)
      if (n.squaredNorm() > 0.5) candidate_normals.push_back(n);
  }
  if (wall_like.empty()) {
    if (warnings) warnings->push_back("no wall-like segment; layout has zero walls");
    return {};
  }

  const double max_pair_cos = cos_deg(90.0 - cfg.angle_tol_deg);
  int best_i = -1, best_j = -1;
  double best = -1.0;
  for (std::size_t a = 0; a < wall_like.size(); ++a)
    for (std::size_t b = a + 1; b < wall_like.size(); ++b) {
      const Vec3& n1 = segments[wall_like[a]].plane->normal;
      const Vec3& n2 = segments[wall_like[b]].plane->normal;
      if (std::abs(n1.dot(n2)) > max_pair_cos) continue;
      const double score = score_wall_pair(n1, n2, candidate_normals);
      if (best_i < 0 || score > best + 1e-9) {
        best = score;
        best_i = wall_like[a];
        best_j = wall_like[b];
      }
    }

  std::vector<int> seeds;
  if (best_i >= 0) {
    seeds = {best_i, best_j};
  } else {
    int most = wall_like.front();
    for (int i : wall_like)
      if (segments[i].points.size() > segments[most].points.size()) most = i;
    seeds = {most};
    if (warnings) warnings->push_back("no orthogonal wall pair; using a single wall");
  }

  std::vector<Wall> walls;
  for (int seed : seeds) {
    if (!pool[seed]) continue;
    Group g = grow(segments, seed, pool, Vec3::Zero(), cfg);
    for (int m : g.members) pool[m] = 0;
    walls.push_back({g.plane, g.members});
  }
  return walls;
}

Cuboid fit_object_cuboid(std::span<const Vec3> points, std::span<const Vec3> normals, const Plane& floor,
                         const ParseConfig& cfg, std::vector<std::string>* warnings) {
  if (points.size() < 3) throw Error(Errc::too_few_points, std::to_string(points.size()) + " points");
  const Vec3& up = floor.normal;
  const FloorFrame frame = FloorFrame::make(floor, std::nullopt);
  const double horizontal_cos = cos_deg(cfg.angle_tol_deg);

  std::vector<Vec2> projected;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool facing_up = i < normals.size() && std::abs(normals[i].dot(up)) >= horizontal_cos;
    if (!facing_up) projected.push_back(frame.project(points[i]));
  }
  if (projected.size() < 10) {
    if (warnings) warnings->push_back("fewer than 10 side points; using all points for the footprint");
    projected.clear();
    for (const Vec3& p : points) projected.push_back(frame.project(p));
  }

  std::vector<Vec2> boundary;
  try {
    const std::vector<Vec2> hull = convex_hull_2d(projected);
    for (const Vec2& p : projected)
      for (std::size_t k = 0; k < hull.size(); ++k) {
        const Vec2& a = hull[k];
        const Vec2& b = hull[(k + 1) % hull.size()];
        const Vec2 ab = b - a;
        const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
        if ((a + t * ab - p).norm() <= cfg.hull_band) {
          boundary.push_back(p);
          break;
        }
      }
  } catch (const Error&) {
    boundary.clear();
  }
  if (boundary.size() < 2) boundary = projected;

  Vec3 forward = frame.e1;
  try {
    const Vec2 dir = fit_line_ransac(boundary, cfg.line_ransac);
    forward = frame.horizontal(Vec2(-dir.y(), dir.x())).normalized();
  } catch (const Error&) {
    if (warnings) warnings->push_back("footprint has no dominant direction; using the floor frame axis");
  }
  return fit_upright_obb(points, up, forward);
}

void gather_points(std::span<const Segment> segments, std::span<const int> members, std::vector<Vec3>& points,
                   std::vector<Vec3>& normals) {
  points.clear();
  normals.clear();
  for (int m : members) {
    points.insert(points.end(), segments[m].points.begin(), segments[m].points.end());
    normals.insert(normals.end(), segments[m].point_normals.begin(), segments[m].point_normals.end());
  }
}

ParseConfig scaled_for(const ParseConfig& cfg, int width, int height) {
  ParseConfig out = cfg;
  const double pixels = static_cast<double>(width) * height;
  out.min_wall_points =
      static_cast<std::size_t>(std::ceil(static_cast<double>(cfg.min_wall_points) * pixels / (640.0 * 480.0)));
  return out;
}

SceneParse parse_scene(const RgbdFrame& frame, std::span<const Segment> segments,
                       const std::vector<std::vector<int>>& object_masks, const ParseConfig& cfg) {
  SceneParse out;
  std::vector<char> eligible(segments.size(), 1);
  for (const auto& mask : object_masks)
    for (int s : mask) {
      if (s < 0 || static_cast<std::size_t>(s) >= segments.size())
        throw Error(Errc::invariant_violation, "object mask references unknown segment");
      eligible[s] = 0;
    }
  const ParseConfig scaled = scaled_for(cfg, frame.width(), frame.height());

  const FloorFit floor = extract_floor(segments, frame.gravity, scaled, eligible);
  out.layout.floor = floor.plane;
  out.layout.floor_up = floor.plane.normal;
  out.layout.floor_segments = floor.segments;
  out.layout.walls = extract_walls(segments, floor, scaled, eligible, &out.warnings);

  std::vector<Vec3> points, normals;
  for (const auto& mask : object_masks) {
    gather_points(segments, mask, points, normals);
    out.cuboids.push_back(fit_object_cuboid(points, normals, floor.plane, cfg, &out.warnings));
  }
  return out;
}

void tag_layout(std::vector<Segment>& segments, const RoomLayout& layout) {
  for (int s : layout.floor_segments) {
    segments[s].tag = SegmentTag::floor;
    segments[s].label = "floor";
  }
  for (const Wall& w : layout.walls)
    for (int s : w.segments) {
      segments[s].tag = SegmentTag::wall;
      segments[s].label = "wall";
    }
}

}  // namespace rgbdann
