#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "rgbdann/structure_graph.hpp"
#include "support.hpp"

using namespace rgbdann;
using testing::box;
using testing::Gen;

namespace {

RoomLayout room() {
  RoomLayout l;
  l.floor = Plane{Vec3::UnitZ(), 0.0};
  l.floor_up = Vec3::UnitZ();
  l.walls = {Wall{Plane{Vec3::UnitX(), 0.0}, {}}, Wall{Plane{Vec3::UnitY(), 0.0}, {}}};
  return l;
}

SGNode node(int id, const Cuboid& c) {
  SGNode n;
  n.id = id;
  n.cuboid = c;
  return n;
}

// Random scene: floor objects plus objects stacked on earlier ones, some floating.
std::vector<SGNode> random_nodes(Gen& g) {
  std::vector<SGNode> nodes;
  const int n = g.integer(1, 7);
  for (int i = 1; i <= n; ++i) {
    Cuboid c;
    if (i > 1 && g.coin(0.5)) {
      const Cuboid& base = nodes[g.integer(0, i - 2)].cuboid;
      c = box(base.center.x() + g.uniform(-0.3, 0.3), base.center.y() + g.uniform(-0.3, 0.3),
              base.top_level() + g.uniform(-0.05, 0.2), g.uniform(0.1, 0.6), g.uniform(0.1, 0.6), g.uniform(0.1, 0.5),
              g.angle());
    } else {
      c = box(g.uniform(0.3, 3.5), g.uniform(0.3, 3.5), g.coin(0.8) ? g.uniform(0.0, 0.1) : g.uniform(0.2, 1.0),
              g.uniform(0.2, 1.5), g.uniform(0.2, 1.5), g.uniform(0.2, 1.2), g.angle());
    }
    nodes.push_back(node(i, c));
  }
  return nodes;
}

void check_forest(const StructureGraph& g) {
  CHECK(std::is_sorted(g.nodes.begin(), g.nodes.end(), [](const SGNode& a, const SGNode& b) { return a.id < b.id; }));
  CHECK(std::is_sorted(g.edges.begin(), g.edges.end()));
  std::set<int> children;
  for (const Edge& e : g.edges) {
    CHECK(e.parent != e.child);
    CHECK((e.parent == kFloorId || g.find(e.parent)));
    CHECK(g.find(e.child));
    CHECK(children.insert(e.child).second);
  }
  for (const SGNode& n : g.nodes) {
    int cur = n.id, steps = 0;
    while (auto p = g.parent_of(cur)) {
      cur = *p;
      if (cur == kFloorId || ++steps > static_cast<int>(g.nodes.size())) break;
    }
    CHECK(steps <= static_cast<int>(g.nodes.size()));
  }
  std::vector<int> order = g.level_order();
  std::sort(order.begin(), order.end());
  CHECK(order == g.node_ids());
}

std::vector<Edge> random_edges(Gen& g, int nodes) {
  std::vector<Edge> out;
  for (int c = 1; c <= nodes; ++c)
    if (g.coin(0.7)) out.push_back({g.integer(0, nodes), c});
  return out;
}

}  // namespace

TEST_SUITE("structure-graph") {
  TEST_CASE("build_graph output is a support forest") {
    Gen g(41);
    for (int t = 0; t < 300; ++t) check_forest(build_graph(room(), random_nodes(g), ParseConfig{}));
  }

  TEST_CASE("every edge is backed by a support test") {
    Gen g(42);
    const ParseConfig cfg;
    for (int t = 0; t < 200; ++t) {
      const StructureGraph sg = build_graph(room(), random_nodes(g), cfg);
      for (const Edge& e : sg.edges) {
        const SGNode& child = sg.node(e.child);
        if (e.parent == kFloorId) CHECK(is_floor_supported(child.cuboid, sg.frame, cfg));
        else CHECK(is_supporting(sg.node(e.parent), child, cfg));
      }
      // A node with a floor candidate is never left floating.
      for (const SGNode& n : sg.nodes)
        if (is_floor_supported(n.cuboid, sg.frame, cfg)) CHECK(sg.parent_of(n.id).has_value());
    }
  }

  TEST_CASE("node order never changes the edges") {
    Gen g(43);
    for (int t = 0; t < 100; ++t) {
      std::vector<SGNode> nodes = random_nodes(g);
      const StructureGraph a = build_graph(room(), nodes, ParseConfig{});
      std::shuffle(nodes.begin(), nodes.end(), g.engine());
      const StructureGraph b = build_graph(room(), nodes, ParseConfig{});
      CHECK(a.edges == b.edges);
      CHECK(a == b);
    }
  }

  TEST_CASE("lifting the child by 2 d_T breaks support") {
    Gen g(44);
    const ParseConfig cfg;
    const StructureGraph dummy = build_graph(room(), {}, cfg);
    for (int t = 0; t < 100; ++t) {
      const Cuboid base = box(2, 2, 0, 1.0, 1.0, g.uniform(0.3, 1.0));
      Cuboid top = box(2 + g.uniform(-0.2, 0.2), 2 + g.uniform(-0.2, 0.2), base.top_level() + g.uniform(-0.1, 0.1), 0.3,
                       0.3, 0.2, g.angle());
      SGNode vi = node(1, base), vj = node(2, top);
      refresh_node(vi, dummy.frame, room(), cfg);
      refresh_node(vj, dummy.frame, room(), cfg);
      REQUIRE(is_supporting(vi, vj, cfg));
      vj.cuboid.center += 2 * cfg.dist_tol * vj.cuboid.up;
      CHECK_FALSE(is_supporting(vi, vj, cfg));
    }
  }

  TEST_CASE("edge edit distance is a metric") {
    Gen g(45);
    for (int t = 0; t < 300; ++t) {
      const int n = g.integer(1, 6);
      const auto a = random_edges(g, n), b = random_edges(g, n), c = random_edges(g, n);
      CHECK(edge_edit_distance(a, a) == 0);
      CHECK(edge_edit_distance(a, b) == edge_edit_distance(b, a));
      CHECK(edge_edit_distance(a, c) <= edge_edit_distance(a, b) + edge_edit_distance(b, c));
      if (edge_edit_distance(a, b) == 0) {
        std::set<Edge> sa(a.begin(), a.end()), sb(b.begin(), b.end());
        CHECK(sa == sb);
      }
    }
    const std::vector<Edge> x{{0, 1}, {1, 2}}, y{{0, 1}, {0, 2}};
    CHECK(edge_edit_distance(x, y) == 2);
  }

  TEST_CASE("graphs over different nodes cannot be compared") {
    const StructureGraph a = build_graph(room(), {node(1, box(1, 1, 0, 1, 1, 1))}, ParseConfig{});
    const StructureGraph b = build_graph(room(), {node(2, box(1, 1, 0, 1, 1, 1))}, ParseConfig{});
    CHECK(testing::error_code([&] { edge_edit_distance(a, b); }) == Errc::node_set_mismatch);
    CHECK(edge_edit_distance(a, a) == 0);
  }

  TEST_CASE("reserved and duplicate ids are rejected") {
    CHECK(testing::error_code([] { build_graph(room(), {node(0, box(1, 1, 0, 1, 1, 1))}, ParseConfig{}); }) ==
          Errc::invariant_violation);
    CHECK(testing::error_code([] {
            build_graph(room(), {node(1, box(1, 1, 0, 1, 1, 1)), node(1, box(2, 2, 0, 1, 1, 1))}, ParseConfig{});
          }) == Errc::invariant_violation);
  }

  TEST_CASE("two candidate parents: the larger overlap wins") {
    // A board resting across two tables, mostly on the second.
    const Cuboid t1 = box(1.0, 2.0, 0, 1.0, 1.0, 0.7), t2 = box(2.0, 2.0, 0, 1.0, 1.0, 0.7);
    const Cuboid board = box(1.8, 2.0, 0.7, 1.0, 0.5, 0.05);
    const StructureGraph g = build_graph(room(), {node(1, t1), node(2, t2), node(3, board)}, ParseConfig{});
    CHECK(g.parent_of(3) == 2);
    CHECK(g.parent_of(1) == kFloorId);
    CHECK(g.ground() == std::vector<int>{1, 2});
    CHECK(g.floating().empty());
    CHECK(g.level_order() == std::vector<int>{1, 2, 3});
  }

  TEST_CASE("containment counts as support") {
    const Cuboid shelf = box(1.0, 1.0, 0, 0.4, 1.0, 1.8), book = box(1.0, 1.0, 0.9, 0.2, 0.2, 0.25);
    const StructureGraph g = build_graph(room(), {node(1, shelf), node(2, book)}, ParseConfig{});
    CHECK(g.parent_of(2) == 1);
  }

  TEST_CASE("floating objects and level order") {
    const StructureGraph g = build_graph(
        room(), {node(1, box(1, 1, 0, 1, 1, 0.5)), node(2, box(3, 3, 0.6, 0.5, 0.5, 0.5)), node(3, box(1, 1, 0.5, 0.3, 0.3, 0.3)),
                 node(4, box(3, 3, 1.1, 0.2, 0.2, 0.2))},
        ParseConfig{});
    CHECK(g.floating() == std::vector<int>{2});
    CHECK(g.parent_of(4) == 2);
    CHECK(g.level_order() == std::vector<int>{1, 3, 2, 4});
  }

  TEST_CASE("wall flags use the back face") {
    const ParseConfig cfg;
    const WallFlags against = compute_wall_flags(box(0.6, 2.0, 0, 1.0, 2.0, 0.5), room(), cfg);
    CHECK(against.contact);
    CHECK(against.align);
    CHECK(against.wall == 0);
    CHECK(against.face == 1);
    const WallFlags middle = compute_wall_flags(box(2.0, 2.0, 0, 1.0, 1.0, 0.5, M_PI / 4), room(), cfg);
    CHECK_FALSE(middle.contact);
    CHECK_FALSE(middle.align);
    RoomLayout bare = room();
    bare.walls.clear();
    const WallFlags none = compute_wall_flags(box(0.6, 2.0, 0, 1.0, 2.0, 0.5), bare, cfg);
    CHECK(none.wall == -1);
    CHECK_FALSE(none.contact);
  }
}
