#include "rgbdann/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "rgbdann/error.hpp"

namespace rgbdann {
namespace {

constexpr Rgb kFloorColor{120, 110, 100};
constexpr Rgb kWallXColor{200, 190, 170};
constexpr Rgb kWallYColor{165, 180, 200};
constexpr Rgb kClutterColor{60, 60, 60};

struct CameraBasis {
  Vec3 position, right, down, forward;
  Eigen::Matrix3d rotation;  // world -> camera

  explicit CameraBasis(const SceneSpec& spec) : position(spec.camera_position) {
    forward = (spec.camera_target - spec.camera_position).normalized();
    right = forward.cross(Vec3::UnitZ()).normalized();
    down = forward.cross(right);
    rotation.row(0) = right;
    rotation.row(1) = down;
    rotation.row(2) = forward;
  }
  Vec3 to_camera(const Vec3& p) const { return rotation * (p - position); }
  Vec3 direction_to_camera(const Vec3& d) const { return rotation * d; }
  Plane plane_to_camera(const Vec3& n, double offset) const {
    return {rotation * n, offset - n.dot(position)};
  }
};

Vec3 forward_of(double yaw) { return {std::cos(yaw), std::sin(yaw), 0.0}; }

Cuboid world_cuboid(const ObjectSpec& o) {
  Cuboid c;
  c.up = Vec3::UnitZ();
  c.forward = forward_of(o.yaw);
  c.half_extents = 0.5 * o.size;
  c.center = Vec3(o.center.x(), o.center.y(), o.base + 0.5 * o.size.z());
  return c;
}

Rect2 world_rect(const ObjectSpec& o) {
  return {o.center, Vec2(std::cos(o.yaw), std::sin(o.yaw)), Vec2(0.5 * o.size.x(), 0.5 * o.size.y())};
}

/// Entry distance of a ray into a box and the entered face's normal.
bool ray_box(const Vec3& origin, const Vec3& dir, const Cuboid& c, double& t_hit, Vec3& normal) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int axis_hit = -1;
  double sign_hit = 1.0;
  for (int k = 0; k < 3; ++k) {
    const Vec3 a = c.axis(k);
    const double o = (origin - c.center).dot(a), d = dir.dot(a), h = c.half_extents[k];
    if (std::abs(d) < 1e-15) {
      if (std::abs(o) > h) return false;
      continue;
    }
    double ta = (-h - o) / d, tb = (h - o) / d;
    double s = -1.0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis_hit = k;
      sign_hit = s;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  if (axis_hit < 0) return false;
  t_hit = t0;
  normal = sign_hit * c.axis(axis_hit);
  return true;
}

Rgb shade(const Rgb& base, const Vec3& n) {
  static const Vec3 light = Vec3(0.3, 0.5, 0.8).normalized();
  const double f = 0.6 + 0.4 * std::max(0.0, n.dot(light));
  auto ch = [&](std::uint8_t c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c * f, 0.0, 255.0))); };
  return {ch(base.r), ch(base.g), ch(base.b)};
}

Rgb jitter_color(const Rgb& c, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-15, 15);
  auto ch = [&](std::uint8_t v) { return static_cast<std::uint8_t>(std::clamp(v + d(rng), 0, 255)); };
  return {ch(c.r), ch(c.g), ch(c.b)};
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

}  // namespace

std::vector<CategoryRule> default_categories() {
  return {
      {"bed", {2.0, 1.5, 0.5}, true, true, {}, 0.8, 1, {180, 60, 60}},
      {"sofa", {0.9, 2.0, 0.85}, true, true, {}, 0.35, 1, {60, 120, 180}},
      {"dresser", {0.5, 1.0, 0.9}, true, true, {}, 0.5, 1, {140, 90, 40}},
      {"night stand", {0.45, 0.45, 0.55}, true, true, {}, 0.8, 2, {200, 160, 60}},
      {"desk", {0.6, 1.2, 0.75}, true, true, {}, 0.35, 1, {90, 160, 90}},
      {"chair", {0.5, 0.5, 0.85}, true, false, {}, 0.35, 2, {160, 80, 160}},
      {"bookshelf", {0.35, 0.8, 1.8}, true, true, {}, 0.4, 1, {60, 60, 120}},
      {"lamp", {0.3, 0.3, 0.5}, false, false, {"night stand", "dresser", "desk"}, 0.6, 2, {240, 240, 120}},
      {"pillow", {0.35, 0.55, 0.15}, false, false, {"bed", "sofa"}, 0.9, 3, {235, 235, 235}},
  };
}

std::vector<std::string> category_names(const std::vector<CategoryRule>& rules) {
  std::vector<std::string> out;
  for (const CategoryRule& r : rules) out.push_back(r.name);
  return out;
}

SizeCatalog catalog_from(const std::vector<CategoryRule>& rules) {
  SizeCatalog out;
  for (const CategoryRule& r : rules) out[r.name].push_back({r.size.x() * r.size.y(), r.size.z()});
  return out;
}

Cuboid camera_cuboid(const SceneSpec& spec, const ObjectSpec& o) {
  const CameraBasis cam(spec);
  const Cuboid w = world_cuboid(o);
  Cuboid c;
  c.center = cam.to_camera(w.center);
  c.up = cam.direction_to_camera(w.up);
  c.forward = cam.direction_to_camera(w.forward);
  c.half_extents = w.half_extents;
  return c;
}

SyntheticScene render_scene(const SceneSpec& spec) {
  const CameraBasis cam(spec);
  const int w = spec.width, h = spec.height;
  SyntheticScene out;
  out.spec = spec;
  RgbdFrame& frame = out.frame;
  frame.frame_id = spec.frame_id;
  frame.color = Image<Rgb>(w, h);
  frame.depth = Image<float>(w, h, 0.0f);
  frame.intrinsics = spec.intrinsics;
  frame.gravity = cam.direction_to_camera(-Vec3::UnitZ());
  out.object_ids = Image<int>(w, h, 0);

  std::vector<Cuboid> boxes;
  for (const ObjectSpec& o : spec.objects) boxes.push_back(world_cuboid(o));
  std::vector<Vec3> lo(spec.objects.size(), Vec3::Constant(1e9)), hi(spec.objects.size(), Vec3::Constant(-1e9));
  out.visible_pixels.assign(spec.objects.size(), 0);

  const Intrinsics& K = spec.intrinsics;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const Vec3 dir = cam.right * ((u - K.cx) / K.fx) + cam.down * ((v - K.cy) / K.fy) + cam.forward;
      const Vec3& o = cam.position;
      double best = std::numeric_limits<double>::infinity();
      Rgb color{0, 0, 0};
      int hit_object = -1;
      Vec3 hit_normal = Vec3::Zero();
      auto inside = [](double x, double a, double b) { return x >= a && x <= b; };
      if (dir.z() < 0.0) {
        const double t = -o.z() / dir.z();
        const Vec3 p = o + t * dir;
        if (t < best && inside(p.x(), 0, spec.room_x) && inside(p.y(), 0, spec.room_y)) {
          best = t;
          color = shade(kFloorColor, Vec3::UnitZ());
        }
      }
      if (dir.x() < 0.0) {
        const double t = -o.x() / dir.x();
        const Vec3 p = o + t * dir;
        if (t < best && inside(p.y(), 0, spec.room_y) && inside(p.z(), 0, spec.room_height)) {
          best = t;
          color = shade(kWallXColor, Vec3::UnitX());
        }
      }
      if (dir.y() < 0.0) {
        const double t = -o.y() / dir.y();
        const Vec3 p = o + t * dir;
        if (t < best && inside(p.x(), 0, spec.room_x) && inside(p.z(), 0, spec.room_height)) {
          best = t;
          color = shade(kWallYColor, Vec3::UnitY());
        }
      }
      for (std::size_t k = 0; k < boxes.size(); ++k) {
        double t;
        Vec3 n;
        if (ray_box(o, dir, boxes[k], t, n) && t < best) {
          best = t;
          hit_object = static_cast<int>(k);
          hit_normal = n;
        }
      }
      if (!std::isfinite(best)) continue;
      const Vec3 p = o + best * dir;
      if (hit_object >= 0) {
        const ObjectSpec& obj = spec.objects[hit_object];
        if (p.z() < obj.hidden_below) {
          frame.color(u, v) = kClutterColor;
          continue;
        }
        color = shade(obj.color, hit_normal);
        out.object_ids(u, v) = obj.id;
        ++out.visible_pixels[hit_object];
        const Vec3 local = boxes[hit_object].to_local(p);
        lo[hit_object] = lo[hit_object].cwiseMin(local);
        hi[hit_object] = hi[hit_object].cwiseMax(local);
      }
      frame.color(u, v) = color;
      frame.depth(u, v) = static_cast<float>(best);
    }

  std::mt19937_64 noise_rng(spec.noise_seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < frame.depth.size(); ++i) {
    double z = frame.depth[i];
    if (z <= 0.0) continue;
    if (spec.noise_k > 0.0) z += spec.noise_k * z * z * unit(noise_rng);
    frame.depth[i] = depth_from_millimeters(depth_to_millimeters(static_cast<float>(std::max(z, 0.001))));
  }

  out.coverage.assign(spec.objects.size(), 0.0);
  for (std::size_t k = 0; k < spec.objects.size(); ++k) {
    if (out.visible_pixels[k] == 0) continue;
    const ObjectSpec& obj = spec.objects[k];
    const double bottom = std::max(obj.base, obj.hidden_below);
    const double vertical = obj.base + obj.size.z() - bottom;
    const Vec3 span = hi[k] - lo[k];
    out.coverage[k] = std::min({span.x() / obj.size.x(), span.y() / obj.size.y(), span.z() / vertical});
  }

  // Ground truth in camera coordinates.
  AnnotationRecord& truth = out.truth;
  truth.frame_id = spec.frame_id;
  truth.layout.floor = cam.plane_to_camera(Vec3::UnitZ(), 0.0);
  truth.layout.floor_up = truth.layout.floor.normal;
  truth.layout.walls = {{cam.plane_to_camera(Vec3::UnitX(), 0.0), {}}, {cam.plane_to_camera(Vec3::UnitY(), 0.0), {}}};
  const ParseConfig cfg;
  std::vector<SGNode> nodes;
  for (const ObjectSpec& obj : spec.objects) {
    std::vector<int> pixels;
    for (std::size_t i = 0; i < out.object_ids.size(); ++i)
      if (out.object_ids[i] == obj.id) pixels.push_back(static_cast<int>(i));
    ObjectRecord rec;
    rec.id = obj.id;
    rec.label = obj.category;
    rec.mask = encode_rle(pixels, w, h);
    rec.cuboid = camera_cuboid(spec, obj);
    const WallFlags flags = compute_wall_flags(rec.cuboid, truth.layout, cfg);
    rec.wall_contact = flags.contact;
    rec.wall_align = flags.align;
    truth.objects.push_back(rec);
    truth.edges.push_back({obj.parent, obj.id});

    SGNode n;
    n.id = obj.id;
    n.cuboid = rec.cuboid;
    n.label = obj.category;
    nodes.push_back(n);
  }
  std::sort(truth.edges.begin(), truth.edges.end());
  std::sort(nodes.begin(), nodes.end(), [](const SGNode& a, const SGNode& b) { return a.id < b.id; });
  out.truth_graph.frame = truth.layout.frame();
  for (SGNode& n : nodes) refresh_node(n, out.truth_graph.frame, truth.layout, cfg);
  out.truth_graph.nodes = std::move(nodes);
  out.truth_graph.edges = truth.edges;
  return out;
}

bool objects_visible(const SyntheticScene& scene, double min_coverage, int min_pixels) {
  const CameraBasis cam(scene.spec);
  for (std::size_t k = 0; k < scene.spec.objects.size(); ++k) {
    if (scene.visible_pixels[k] < min_pixels || scene.coverage[k] < min_coverage) return false;
    for (const Vec3& corner : world_cuboid(scene.spec.objects[k]).corners()) {
      const Vec3 p = cam.to_camera(corner);
      if (p.z() < 0.3) return false;
      const Vec2 q = scene.spec.intrinsics.project(p);
      if (q.x() < 2 || q.y() < 2 || q.x() > scene.spec.width - 3 || q.y() > scene.spec.height - 3) return false;
    }
  }
  return true;
}

SceneSpec sample_layout(const GeneratorParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SceneSpec spec;
  spec.frame_id = "synth-" + std::to_string(seed);
  spec.camera_position += Vec3(uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15), uniform(rng, -0.1, 0.1));
  spec.camera_target += Vec3(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, -0.1, 0.1));
  spec.noise_k = params.noise_k;
  spec.noise_seed = rng();
  const CameraBasis cam(spec);

  const int count = std::uniform_int_distribution<int>(params.min_objects, params.max_objects)(rng);
  std::map<std::string, int> used;
  auto rule_ok = [&](const CategoryRule& r) {
    return (params.allowed.empty() || params.allowed.contains(r.name)) && used[r.name] < r.max_per_scene;
  };
  auto in_view = [&](const ObjectSpec& o) {
    for (const Vec3& corner : world_cuboid(o).corners()) {
      const Vec3 p = cam.to_camera(corner);
      if (p.z() < 0.5) return false;
      const Vec2 q = spec.intrinsics.project(p);
      if (q.x() < 3 || q.y() < 3 || q.x() > spec.width - 4 || q.y() > spec.height - 4) return false;
    }
    return true;
  };

  for (int attempt = 0; attempt < 80 && static_cast<int>(spec.objects.size()) < count; ++attempt) {
    std::vector<const CategoryRule*> options;
    std::vector<double> weights;
    for (const CategoryRule& r : params.categories) {
      if (!rule_ok(r)) continue;
      if (!r.on_floor) {
        const bool has_parent = std::any_of(spec.objects.begin(), spec.objects.end(), [&](const ObjectSpec& o) {
          return std::find(r.parents.begin(), r.parents.end(), o.category) != r.parents.end();
        });
        if (!has_parent) continue;
      }
      options.push_back(&r);
      weights.push_back(r.weight);
    }
    if (options.empty()) break;
    const CategoryRule& rule = *options[std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng)];

    ObjectSpec o;
    o.id = static_cast<int>(spec.objects.size()) + 1;
    o.category = rule.name;
    o.color = jitter_color(rule.color, rng);
    o.size = rule.size.cwiseProduct(Vec3(uniform(rng, 0.88, 1.12), uniform(rng, 0.88, 1.12), uniform(rng, 0.88, 1.12)));

    bool placed = false;
    for (int tries = 0; tries < 30 && !placed; ++tries) {
      if (rule.on_floor) {
        o.parent = kFloorId;
        o.base = 0.0;
        if (rule.against_wall) {
          const bool wall_x = rng() % 2 == 0;  // back against x = 0, else y = 0
          o.yaw = (wall_x ? 0.0 : std::numbers::pi / 2) + uniform(rng, -8.0, 8.0) * std::numbers::pi / 180.0;
          const double along_room = wall_x ? spec.room_y : spec.room_x;
          const double along = uniform(rng, 0.2 + 0.5 * o.size.y(), along_room - 0.2 - 0.5 * o.size.y());
          o.center = wall_x ? Vec2(0.0, along) : Vec2(along, 0.0);
          double min_off = std::numeric_limits<double>::infinity();
          for (const Vec2& c : world_rect(o).corners()) min_off = std::min(min_off, wall_x ? c.x() : c.y());
          const double shift = uniform(rng, 0.0, 0.08) - min_off;
          o.center += wall_x ? Vec2(shift, 0.0) : Vec2(0.0, shift);
        } else {
          o.yaw = uniform(rng, 0.0, std::numbers::pi / 2);
          o.center = Vec2(uniform(rng, 0.6, spec.room_x - 0.6), uniform(rng, 0.6, spec.room_y - 0.6));
        }
        bool ok = true;
        for (const Vec2& c : world_rect(o).corners())
          ok &= c.x() >= 0.0 && c.y() >= 0.0 && c.x() <= spec.room_x - 0.02 && c.y() <= spec.room_y - 0.02;
        for (const ObjectSpec& other : spec.objects)
          if (other.parent == kFloorId) ok &= rect_distance(world_rect(o), world_rect(other)) >= 0.25;
        placed = ok && in_view(o);
      } else {
        std::vector<const ObjectSpec*> parents;
        for (const ObjectSpec& p : spec.objects)
          if (std::find(rule.parents.begin(), rule.parents.end(), p.category) != rule.parents.end())
            parents.push_back(&p);
        const ObjectSpec& parent = *parents[std::uniform_int_distribution<std::size_t>(0, parents.size() - 1)(rng)];
        o.parent = parent.id;
        o.base = parent.base + parent.size.z();
        o.yaw = parent.yaw + uniform(rng, -15.0, 15.0) * std::numbers::pi / 180.0;
        const Rect2 top = world_rect(parent);
        const Vec2 offset(uniform(rng, -1.0, 1.0) * top.half_extents.x(), uniform(rng, -1.0, 1.0) * top.half_extents.y());
        o.center = top.center + offset.x() * top.axis + offset.y() * top.perp();
        Rect2 inner = top;
        inner.half_extents -= Vec2::Constant(0.03);
        bool ok = inner.half_extents.minCoeff() > 0.0;
        for (const Vec2& c : world_rect(o).corners()) ok &= ok && point_in_rect(c, inner);
        for (const ObjectSpec& other : spec.objects)
          if (other.parent == parent.id) ok &= rect_distance(world_rect(o), world_rect(other)) >= 0.05;
        placed = ok && in_view(o);
      }
    }
    if (!placed) continue;
    ++used[rule.name];
    spec.objects.push_back(o);
  }

  for (ObjectSpec& o : spec.objects)
    if (o.parent == kFloorId && params.occlusion_rate > 0.0 && uniform(rng, 0.0, 1.0) < params.occlusion_rate)
      o.hidden_below = o.base + uniform(rng, 0.35, 0.6) * o.size.z();
  return spec;
}

SyntheticScene generate_scene(const GeneratorParams& params, std::uint64_t seed) {
  for (int attempt = 0; attempt <= params.max_retries; ++attempt) {
    const std::uint64_t sub = seed * 1000003ULL + static_cast<std::uint64_t>(attempt);
    SceneSpec spec = sample_layout(params, sub);
    if (static_cast<int>(spec.objects.size()) < params.min_objects) continue;
    spec.frame_id = "synth-" + std::to_string(seed);
    SyntheticScene scene = render_scene(spec);
    if (!objects_visible(scene, params.min_coverage)) continue;
    scene.seed = seed;
    return scene;
  }
  throw Error(Errc::placement_failure, "no valid layout for seed " + std::to_string(seed));
}

SceneSpec two_click_scene() {
  SceneSpec spec;
  spec.frame_id = "two-click";
  const auto rules = default_categories();
  auto color_of = [&](const std::string& name) {
    for (const CategoryRule& r : rules)
      if (r.name == name) return r.color;
    return Rgb{};
  };
  // Bed headboard against the y = 0 wall; the night stand stands beside the head end,
  // behind the bed as seen from the low camera, so its lower half is hidden.
  ObjectSpec bed{1, "bed", Vec2(1.9, 1.03), std::numbers::pi / 2, Vec3(2.0, 1.4, 0.45), kFloorId, 0.0, 0.0, color_of("bed")};
  ObjectSpec stand{2, "night stand", Vec2(0.85, 0.3), std::numbers::pi / 2, Vec3(0.45, 0.45, 0.6), kFloorId, 0.0, 0.0,
                   color_of("night stand")};
  ObjectSpec pillow1{3, "pillow", Vec2(1.55, 0.35), std::numbers::pi / 2, Vec3(0.35, 0.55, 0.15), 1, 0.45, 0.0,
                     color_of("pillow")};
  ObjectSpec pillow2{4, "pillow", Vec2(2.25, 0.35), std::numbers::pi / 2, Vec3(0.35, 0.55, 0.15), 1, 0.45, 0.0,
                     Rgb{225, 225, 240}};
  spec.objects = {bed, stand, pillow1, pillow2};
  spec.camera_position = Vec3(3.8, 3.0, 1.1);
  spec.camera_target = Vec3(0.8, 0.6, 0.3);
  return spec;
}

std::map<int, std::vector<int>> simulated_masks(const SyntheticScene& scene, std::span<const Segment> segments) {
  std::vector<int> ids;
  for (const ObjectSpec& o : scene.spec.objects) ids.push_back(o.id);
  return majority_masks(scene.object_ids, ids, segments);
}

}  // namespace rgbdann
