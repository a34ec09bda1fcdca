#pragma once

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rgbdann/geometry.hpp"
#include "rgbdann/layout.hpp"

namespace rgbdann {

inline constexpr int kFloorId = 0;

struct SGNode {
  int id = 0;
  std::vector<int> segments;
  Cuboid cuboid;
  Rect2 rect;
  bool wall_contact = false;
  bool wall_align = false;
  std::optional<std::string> label;
  std::vector<std::string> suggestions;

  bool operator==(const SGNode&) const = default;
};

/// parent supports child; parent may be kFloorId.
struct Edge {
  int parent = kFloorId;
  int child = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Directed support forest rooted at the floor. Nodes are kept sorted by id and
/// edges sorted lexicographically, so equal graphs compare equal.
struct StructureGraph {
  FloorFrame frame;
  std::vector<SGNode> nodes;
  std::vector<Edge> edges;

  const SGNode* find(int id) const;
  SGNode* find(int id);
  const SGNode& node(int id) const;
  SGNode& node(int id);
  std::optional<int> parent_of(int id) const;
  std::vector<int> children_of(int id) const;
  std::vector<int> node_ids() const;
  /// V_g: children of the floor.
  std::vector<int> ground() const;
  /// V_f: nodes with no supporting parent.
  std::vector<int> floating() const;
  /// Floor children level by level, then each floating root followed by its subtree.
  std::vector<int> level_order() const;
  double height_above_floor(double level) const { return level - frame.floor_level(); }

  bool operator==(const StructureGraph&) const = default;
};

struct WallFlags {
  bool contact = false;
  bool align = false;
  int wall = -1;  // index of the nearest wall, -1 without walls
  int face = -1;  // back face: 0 +forward, 1 -forward, 2 +side, 3 -side
};

/// Outward normal and corners of one of the four vertical faces.
struct BoxFace {
  Vec3 normal;
  std::array<Vec3, 4> corners;
};
BoxFace vertical_face(const Cuboid& c, int face);

WallFlags compute_wall_flags(const Cuboid& c, const RoomLayout& layout, const ParseConfig& cfg);
bool is_supporting(const SGNode& vi, const SGNode& vj, const ParseConfig& cfg);
bool is_floor_supported(const Cuboid& c, const FloorFrame& frame, const ParseConfig& cfg);

/// Recompute r_i and wall flags of a node from its cuboid.
void refresh_node(SGNode& node, const FloorFrame& frame, const RoomLayout& layout, const ParseConfig& cfg);

/// Support forest over `nodes` (rects and flags are recomputed).
StructureGraph build_graph(const RoomLayout& layout, std::vector<SGNode> nodes, const ParseConfig& cfg);

/// Symmetric difference of the directed edge sets; node id sets must match.
std::size_t edge_edit_distance(const StructureGraph& g, const StructureGraph& gt);
std::size_t edge_edit_distance(std::span<const Edge> a, std::span<const Edge> b);

}  // namespace rgbdann
