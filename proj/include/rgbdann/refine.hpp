#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "rgbdann/priors.hpp"
#include "rgbdann/structure_graph.hpp"

namespace rgbdann {

/// Geometry of one node as stored in refinement events.
struct NodeGeometry {
  int id = 0;
  Cuboid cuboid;
  Rect2 rect;
  bool wall_contact = false;
  bool wall_align = false;
  bool operator==(const NodeGeometry&) const = default;
};

struct RefinementEvent {
  enum class Kind { local, global_extrude, final_expand, final_extrude, undo };
  Kind kind = Kind::local;
  int node = 0;
  std::vector<NodeGeometry> before, after;  // nodes whose geometry changed
  std::vector<Edge> edges_before, edges_after;
  std::vector<std::string> notes;

  bool changed() const { return before != after || edges_before != edges_after; }
  bool operator==(const RefinementEvent&) const = default;
};

std::string_view to_string(RefinementEvent::Kind kind);
RefinementEvent::Kind event_kind_from_string(std::string_view s);

struct RefineContext {
  const RoomLayout& layout;
  const LabelPriors& priors;
  ParseConfig cfg;
  Vec3 viewpoint = Vec3::Zero();
  /// Node points for the wall-alignment refit; nodes without points are rotated as boxes.
  const std::map<int, std::vector<Vec3>>* points = nullptr;
};

/// Growth beyond kOverExpansionRatio of vol(c), or a newly intersected box in `others`.
bool is_over_expanded(const Cuboid& c, const Cuboid& expanded, std::span<const Cuboid> others);

/// Cuboids of all nodes except the listed ids.
std::vector<Cuboid> scene_cuboids(const StructureGraph& g, std::initializer_list<int> excluded);

bool likely_supports(const SGNode& vi, const SGNode& vj, const StructureGraph& g, const ParseConfig& cfg);
bool likely_occludes(const SGNode& vi, const SGNode& vj, const Vec3& viewpoint, const FloorFrame& frame);

/// c with its bottom face moved to the floor.
Cuboid extrude_to_floor(const Cuboid& c, const FloorFrame& frame);
/// c with its bottom face moved to `level` (top kept, minimum extent respected).
Cuboid snap_bottom(const Cuboid& c, double level);

/// Rules (i)-(iv) for a confirmed label, followed by a graph rebuild.
RefinementEvent local_refine(StructureGraph& g, int node, const std::string& label, const RefineContext& ctx);
std::vector<RefinementEvent> global_refine(StructureGraph& g, int node, const std::string& label,
                                           const RefineContext& ctx);
/// Requires every node to carry a label.
std::vector<RefinementEvent> final_refine(StructureGraph& g, const RefineContext& ctx);

/// Rebuilds edges from current geometry, keeping labels and suggestions.
void rebuild(StructureGraph& g, const RoomLayout& layout, const ParseConfig& cfg);

/// Re-applies the after-state of an event.
void apply_event(StructureGraph& g, const RefinementEvent& e);
/// Pops the most recent event and restores its before-state; returns the undo record.
RefinementEvent undo(StructureGraph& g, std::vector<RefinementEvent>& stack);

}  // namespace rgbdann
