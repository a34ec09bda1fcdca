#include "rgbdann/structure_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "rgbdann/error.hpp"

namespace rgbdann {

const SGNode* StructureGraph::find(int id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const SGNode& n, int v) { return n.id < v; });
  return it != nodes.end() && it->id == id ? &*it : nullptr;
}

SGNode* StructureGraph::find(int id) {
  return const_cast<SGNode*>(std::as_const(*this).find(id));
}

const SGNode& StructureGraph::node(int id) const {
  const SGNode* n = find(id);
  if (!n) throw Error(Errc::unknown_node, "node " + std::to_string(id));
  return *n;
}

SGNode& StructureGraph::node(int id) {
  return const_cast<SGNode&>(std::as_const(*this).node(id));
}

std::optional<int> StructureGraph::parent_of(int id) const {
  for (const Edge& e : edges)
    if (e.child == id) return e.parent;
  return std::nullopt;
}

std::vector<int> StructureGraph::children_of(int id) const {
  std::vector<int> out;
  for (const Edge& e : edges)
    if (e.parent == id) out.push_back(e.child);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> StructureGraph::node_ids() const {
  std::vector<int> out;
  for (const SGNode& n : nodes) out.push_back(n.id);
  return out;
}

std::vector<int> StructureGraph::ground() const { return children_of(kFloorId); }

std::vector<int> StructureGraph::floating() const {
  std::vector<int> out;
  for (const SGNode& n : nodes)
    if (!parent_of(n.id)) out.push_back(n.id);
  return out;
}

std::vector<int> StructureGraph::level_order() const {
  std::vector<int> order;
  auto bfs = [&](std::deque<int> queue) {
    while (!queue.empty()) {
      const int id = queue.front();
      queue.pop_front();
      if (id != kFloorId) order.push_back(id);
      for (int c : children_of(id)) queue.push_back(c);
    }
  };
  bfs({kFloorId});
  const auto roots = floating();
  bfs(std::deque<int>(roots.begin(), roots.end()));
  return order;
}

BoxFace vertical_face(const Cuboid& c, int face) {
  const int axis = face / 2;
  const double sign = face % 2 == 0 ? 1.0 : -1.0;
  const auto all = c.corners();
  BoxFace out;
  out.normal = sign * c.axis(axis);
  int k = 0;
  for (int i = 0; i < 8; ++i) {
    const bool positive = (i >> axis) & 1;
    if (positive == (sign > 0)) out.corners[k++] = all[i];
  }
  return out;
}

WallFlags compute_wall_flags(const Cuboid& c, const RoomLayout& layout, const ParseConfig& cfg) {
  WallFlags flags;
  if (layout.walls.empty()) return flags;
  double best_d = std::numeric_limits<double>::infinity();
  double best_facing = std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < layout.walls.size(); ++w) {
    const Plane& wall = layout.walls[w].plane;
    for (int f = 0; f < 4; ++f) {
      const BoxFace face = vertical_face(c, f);
      double d = std::numeric_limits<double>::infinity();
      for (const Vec3& p : face.corners) d = std::min(d, wall.signed_distance(p));
      d = std::max(d, 0.0);
      const double facing = face.normal.dot(wall.normal);
      if (d < best_d - 1e-12 || (std::abs(d - best_d) <= 1e-12 && facing < best_facing - 1e-12)) {
        best_d = d;
        best_facing = facing;
        flags.wall = static_cast<int>(w);
        flags.face = f;
      }
    }
  }
  const BoxFace back = vertical_face(c, flags.face);
  flags.contact = best_d <= cfg.dist_tol;
  flags.align = line_angle_deg(back.normal, layout.walls[flags.wall].plane.normal) <= cfg.angle_tol_deg;
  return flags;
}

bool is_supporting(const SGNode& vi, const SGNode& vj, const ParseConfig& cfg) {
  const bool touching = std::abs(vi.cuboid.top_level() - vj.cuboid.bottom_level()) <= cfg.dist_tol;
  if (touching && (point_in_rect(vj.rect.center, vi.rect) ||
                   rect_intersection_area(vi.rect, vj.rect) > kSupportOverlapRatio * vj.rect.area()))
    return true;
  return cuboid_contains(vi.cuboid, vj.cuboid);
}

bool is_floor_supported(const Cuboid& c, const FloorFrame& frame, const ParseConfig& cfg) {
  return std::abs(c.bottom_level() - frame.floor_level()) <= cfg.dist_tol;
}

void refresh_node(SGNode& node, const FloorFrame& frame, const RoomLayout& layout, const ParseConfig& cfg) {
  node.rect = frame.footprint(node.cuboid);
  const WallFlags f = compute_wall_flags(node.cuboid, layout, cfg);
  node.wall_contact = f.contact;
  node.wall_align = f.align;
}

StructureGraph build_graph(const RoomLayout& layout, std::vector<SGNode> nodes, const ParseConfig& cfg) {
  StructureGraph g;
  g.frame = layout.frame();
  std::sort(nodes.begin(), nodes.end(), [](const SGNode& a, const SGNode& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == kFloorId) throw Error(Errc::invariant_violation, "node id 0 is reserved for the floor");
    if (i > 0 && nodes[i].id == nodes[i - 1].id)
      throw Error(Errc::invariant_violation, "duplicate node id " + std::to_string(nodes[i].id));
    refresh_node(nodes[i], g.frame, layout, cfg);
  }
  g.nodes = std::move(nodes);

  struct Candidate {
    double score;
    int priority;  // containment 2, floor 1, resting 0
    Edge edge;
  };
  std::vector<Candidate> candidates;
  for (const SGNode& vj : g.nodes) {
    if (is_floor_supported(vj.cuboid, g.frame, cfg)) candidates.push_back({vj.rect.area(), 1, {kFloorId, vj.id}});
    for (const SGNode& vi : g.nodes) {
      if (vi.id == vj.id || !is_supporting(vi, vj, cfg)) continue;
      const int priority = cuboid_contains(vi.cuboid, vj.cuboid) ? 2 : 0;
      candidates.push_back({rect_intersection_area(vi.rect, vj.rect), priority, {vi.id, vj.id}});
    }
  }
  auto key = [](const Candidate& c) {
    return std::make_tuple(-std::round(c.score * 1e9), -c.priority, c.edge.parent, c.edge.child);
  };
  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate& a, const Candidate& b) { return key(a) < key(b); });

  std::map<int, int> parent;
  auto closes_cycle = [&](int p, int child) {
    for (int cur = p; cur != kFloorId;) {
      if (cur == child) return true;
      auto it = parent.find(cur);
      if (it == parent.end()) return false;
      cur = it->second;
    }
    return false;
  };
  for (const Candidate& c : candidates) {
    if (parent.contains(c.edge.child) || closes_cycle(c.edge.parent, c.edge.child)) continue;
    parent[c.edge.child] = c.edge.parent;
  }
  for (auto [child, p] : parent) g.edges.push_back({p, child});
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::size_t edge_edit_distance(std::span<const Edge> a, std::span<const Edge> b) {
  std::set<Edge> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t n = 0;
  for (const Edge& e : sa) n += !sb.contains(e);
  for (const Edge& e : sb) n += !sa.contains(e);
  return n;
}

std::size_t edge_edit_distance(const StructureGraph& g, const StructureGraph& gt) {
  if (g.node_ids() != gt.node_ids()) throw Error(Errc::node_set_mismatch, "graphs have different node ids");
  return edge_edit_distance(g.edges, gt.edges);
}

}  // namespace rgbdann
