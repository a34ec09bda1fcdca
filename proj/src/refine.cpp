#include "rgbdann/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rgbdann/error.hpp"

namespace rgbdann {
namespace {

NodeGeometry geometry_of(const SGNode& n) { return {n.id, n.cuboid, n.rect, n.wall_contact, n.wall_align}; }

void set_geometry(StructureGraph& g, const NodeGeometry& ng) {
  SGNode& n = g.node(ng.id);
  n.cuboid = ng.cuboid;
  n.rect = ng.rect;
  n.wall_contact = ng.wall_contact;
  n.wall_align = ng.wall_align;
}

/// Records geometry and edges around a mutation of the graph.
class EventRecorder {
 public:
  EventRecorder(const StructureGraph& g, RefinementEvent::Kind kind, int node) : g_(g) {
    event_.kind = kind;
    event_.node = node;
    event_.edges_before = g.edges;
    for (const SGNode& n : g.nodes) snapshot_.push_back(geometry_of(n));
  }
  RefinementEvent finish() {
    event_.edges_after = g_.edges;
    for (const NodeGeometry& before : snapshot_) {
      const NodeGeometry after = geometry_of(g_.node(before.id));
      if (after != before) {
        event_.before.push_back(before);
        event_.after.push_back(after);
      }
    }
    return std::move(event_);
  }
  void note(std::string s) { event_.notes.push_back(std::move(s)); }

 private:
  const StructureGraph& g_;
  RefinementEvent event_;
  std::vector<NodeGeometry> snapshot_;
};

void set_cuboid(StructureGraph& g, int id, const Cuboid& c, const RoomLayout& layout, const ParseConfig& cfg) {
  SGNode& n = g.node(id);
  n.cuboid = c;
  refresh_node(n, g.frame, layout, cfg);
}

/// Box with the face `face` (see vertical_face) pushed outward by `amount`.
Cuboid push_face(const Cuboid& c, int face, double amount) {
  Cuboid out = c;
  const int axis = face / 2;
  const double sign = face % 2 == 0 ? 1.0 : -1.0;
  out.half_extents[axis] += 0.5 * amount;
  out.center += sign * 0.5 * amount * c.axis(axis);
  return out;
}

Cuboid rotate_to(const Cuboid& c, const Vec3& forward, const std::vector<Vec3>* points) {
  std::vector<Vec3> pts;
  if (points && !points->empty()) {
    pts = *points;
  } else {
    const auto corners = c.corners();
    pts.assign(corners.begin(), corners.end());
  }
  const Cuboid fitted = fit_upright_obb(pts, c.up, forward);
  return with_vertical_span(fitted, c.bottom_level(), c.top_level());
}

}  // namespace

std::string_view to_string(RefinementEvent::Kind kind) {
  switch (kind) {
    case RefinementEvent::Kind::local: return "local";
    case RefinementEvent::Kind::global_extrude: return "global-extrude";
    case RefinementEvent::Kind::final_expand: return "final-expand";
    case RefinementEvent::Kind::final_extrude: return "final-extrude";
    case RefinementEvent::Kind::undo: return "undo";
  }
  return "local";
}

RefinementEvent::Kind event_kind_from_string(std::string_view s) {
  for (auto k : {RefinementEvent::Kind::local, RefinementEvent::Kind::global_extrude,
                 RefinementEvent::Kind::final_expand, RefinementEvent::Kind::final_extrude,
                 RefinementEvent::Kind::undo})
    if (to_string(k) == s) return k;
  throw Error(Errc::bad_metadata, "unknown event kind '" + std::string(s) + "'");
}

bool is_over_expanded(const Cuboid& c, const Cuboid& expanded, std::span<const Cuboid> others) {
  if (expanded.volume() - c.volume() > kOverExpansionRatio * c.volume()) return true;
  return std::any_of(others.begin(), others.end(),
                     [&](const Cuboid& o) { return cuboids_intersect(expanded, o) && !cuboids_intersect(c, o); });
}

std::vector<Cuboid> scene_cuboids(const StructureGraph& g, std::initializer_list<int> excluded) {
  std::vector<Cuboid> out;
  for (const SGNode& n : g.nodes)
    if (std::find(excluded.begin(), excluded.end(), n.id) == excluded.end()) out.push_back(n.cuboid);
  return out;
}

bool likely_supports(const SGNode& vi, const SGNode& vj, const StructureGraph& g, const ParseConfig& cfg) {
  if (vi.id == vj.id) return false;
  if (std::abs(vi.cuboid.top_level() - vj.cuboid.bottom_level()) > cfg.dist_tol) return false;
  if (rect_distance(vi.rect, vj.rect) > kNearbyDiagonalRatio * vj.rect.diagonal()) return false;
  const Cuboid expanded = expand_to_enclose(vi.cuboid, vj.rect, g.frame);
  return !is_over_expanded(vi.cuboid, expanded, scene_cuboids(g, {vi.id, vj.id}));
}

Cuboid extrude_to_floor(const Cuboid& c, const FloorFrame& frame) { return snap_bottom(c, frame.floor_level()); }

Cuboid snap_bottom(const Cuboid& c, double level) {
  return with_vertical_span(c, level, std::max(c.top_level(), level + kMinBoxExtent));
}

bool likely_occludes(const SGNode& vi, const SGNode& vj, const Vec3& viewpoint, const FloorFrame& frame) {
  if (vi.id == vj.id) return false;
  const Cuboid extruded = extrude_to_floor(vj.cuboid, frame);
  const Vec3 view = extruded.center - viewpoint;
  int frontal = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int f = 0; f < 4; ++f) {
    const double d = vertical_face(extruded, f).normal.dot(view);
    if (d < best - 1e-12) {
      best = d;
      frontal = f;
    }
  }
  for (const Vec3& corner : vertical_face(extruded, frontal).corners)
    if (ray_intersects_cuboid(viewpoint, corner - viewpoint, vi.cuboid)) return true;
  return false;
}

void rebuild(StructureGraph& g, const RoomLayout& layout, const ParseConfig& cfg) {
  const FloorFrame frame = g.frame;
  g = build_graph(layout, std::move(g.nodes), cfg);
  g.frame = frame;
}

RefinementEvent local_refine(StructureGraph& g, int id, const std::string& label, const RefineContext& ctx) {
  EventRecorder rec(g, RefinementEvent::Kind::local, id);
  const RoomLayout& layout = ctx.layout;
  const ParseConfig& cfg = ctx.cfg;
  const std::optional<int> parent = g.parent_of(id);

  if (ctx.priors.wall_align_category(label)) {
    if (layout.walls.empty()) {
      rec.note("NoWall: alignment skipped");
    } else {
      const Cuboid& c = g.node(id).cuboid;
      const WallFlags flags = compute_wall_flags(c, layout, cfg);
      const Vec3 wall_n = layout.walls[flags.wall].plane.normal;
      Vec3 forward = wall_n - wall_n.dot(c.up) * c.up;
      if (forward.norm() > 1e-9) {
        forward.normalize();
        const bool aligned = line_angle_deg(forward, c.forward) < 1e-6 || line_angle_deg(forward, c.side()) < 1e-6;
        if (!aligned) {
          const std::vector<Vec3>* pts = nullptr;
          if (ctx.points) {
            auto it = ctx.points->find(id);
            if (it != ctx.points->end()) pts = &it->second;
          }
          set_cuboid(g, id, rotate_to(c, forward, pts), layout, cfg);
        }
      }
    }
  }

  if (ctx.priors.wall_contact_category(label)) {
    if (layout.walls.empty()) {
      rec.note("NoWall: wall contact skipped");
    } else {
      const Cuboid c = g.node(id).cuboid;
      const WallFlags flags = compute_wall_flags(c, layout, cfg);
      const Plane& wall = layout.walls[flags.wall].plane;
      double gap = std::numeric_limits<double>::infinity();
      for (const Vec3& p : vertical_face(c, flags.face).corners) gap = std::min(gap, wall.signed_distance(p));
      if (gap > 0.0) {
        const Cuboid pushed = push_face(c, flags.face, gap);
        if (is_over_expanded(c, pushed, scene_cuboids(g, {id})))
          rec.note("wall contact skipped: over-expanded");
        else
          set_cuboid(g, id, pushed, layout, cfg);
      }
    }
  }

  bool on_floor = false;
  if (ctx.priors.floor_category(label)) {
    set_cuboid(g, id, extrude_to_floor(g.node(id).cuboid, g.frame), layout, cfg);
    on_floor = true;
  }

  if (!on_floor && parent && *parent != kFloorId) {
    const Cuboid c = g.node(id).cuboid;
    const double top = g.node(*parent).cuboid.top_level();
    const Cuboid snapped = snap_bottom(c, top);
    const bool grows = top < c.bottom_level();
    if (grows && is_over_expanded(c, snapped, scene_cuboids(g, {id, *parent})))
      rec.note("parent snap skipped: over-expanded");
    else
      set_cuboid(g, id, snapped, layout, cfg);
  }

  rebuild(g, layout, cfg);
  return rec.finish();
}

std::vector<RefinementEvent> global_refine(StructureGraph& g, int id, const std::string& label,
                                           const RefineContext& ctx) {
  std::vector<RefinementEvent> events;
  if (!ctx.priors.floor_category(label)) return events;
  for (int j : g.floating()) {
    if (j == id) continue;
    const SGNode& vi = g.node(id);
    const SGNode& vj = g.node(j);
    if (!likely_occludes(vi, vj, ctx.viewpoint, g.frame) || likely_supports(vi, vj, g, ctx.cfg)) continue;
    EventRecorder rec(g, RefinementEvent::Kind::global_extrude, j);
    set_cuboid(g, j, extrude_to_floor(vj.cuboid, g.frame), ctx.layout, ctx.cfg);
    rebuild(g, ctx.layout, ctx.cfg);
    events.push_back(rec.finish());
  }
  return events;
}

std::vector<RefinementEvent> final_refine(StructureGraph& g, const RefineContext& ctx) {
  for (const SGNode& n : g.nodes)
    if (!n.label) throw Error(Errc::incomplete_assignment, "node " + std::to_string(n.id) + " has no label");
  std::vector<RefinementEvent> events;
  for (int id : g.level_order()) {
    RefinementEvent e = local_refine(g, id, *g.node(id).label, ctx);
    if (e.changed()) events.push_back(std::move(e));
  }

  const std::vector<int> ground = g.ground();
  for (int i : g.floating()) {
    const std::string li = *g.node(i).label;
    int best = -1;
    double best_ps = -1.0, best_area = -1.0;
    for (int j : ground) {
      const SGNode& vj = g.node(j);
      const SGNode& vi = g.node(i);
      if (!likely_supports(vj, vi, g, ctx.cfg)) continue;
      const double ps = ctx.priors.p_s(*vj.label, li);
      const double area = rect_intersection_area(vj.rect, vi.rect);
      if (ps > best_ps || (ps == best_ps && area > best_area)) {
        best = j;
        best_ps = ps;
        best_area = area;
      }
    }
    if (ctx.priors.floor_category(li) && (best < 0 || best_ps < kStrongSupport)) {
      EventRecorder rec(g, RefinementEvent::Kind::final_extrude, i);
      set_cuboid(g, i, extrude_to_floor(g.node(i).cuboid, g.frame), ctx.layout, ctx.cfg);
      rebuild(g, ctx.layout, ctx.cfg);
      events.push_back(rec.finish());
    } else if (best >= 0 && best_ps >= kStrongSupport) {
      const Cuboid cj = g.node(best).cuboid;
      const Cuboid expanded = expand_to_enclose(cj, g.node(i).rect, g.frame);
      if (is_over_expanded(cj, expanded, scene_cuboids(g, {best, i}))) continue;
      EventRecorder rec(g, RefinementEvent::Kind::final_expand, i);
      set_cuboid(g, best, expanded, ctx.layout, ctx.cfg);
      set_cuboid(g, i, snap_bottom(g.node(i).cuboid, expanded.top_level()), ctx.layout, ctx.cfg);
      rebuild(g, ctx.layout, ctx.cfg);
      events.push_back(rec.finish());
    }
  }
  rebuild(g, ctx.layout, ctx.cfg);
  return events;
}

void apply_event(StructureGraph& g, const RefinementEvent& e) {
  for (const NodeGeometry& ng : e.after) set_geometry(g, ng);
  g.edges = e.edges_after;
}

RefinementEvent undo(StructureGraph& g, std::vector<RefinementEvent>& stack) {
  if (stack.empty()) throw Error(Errc::no_op, "nothing to undo");
  RefinementEvent e = std::move(stack.back());
  stack.pop_back();
  for (const NodeGeometry& ng : e.before) set_geometry(g, ng);
  g.edges = e.edges_before;
  RefinementEvent record;
  record.kind = RefinementEvent::Kind::undo;
  record.node = e.node;
  record.before = e.after;
  record.after = e.before;
  record.edges_before = e.edges_after;
  record.edges_after = e.edges_before;
  return record;
}

}  // namespace rgbdann
