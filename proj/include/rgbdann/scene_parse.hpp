#pragma once

#include <span>
#include <string>
#include <vector>

#include "rgbdann/frame.hpp"
#include "rgbdann/layout.hpp"
#include "rgbdann/segmentation.hpp"

namespace rgbdann {

/// Parallel within a_T and within d_T of each other's plane (closest point distance).
bool coplanar(const Segment& si, const Segment& sj, const ParseConfig& cfg);

struct FloorFit {
  Plane plane;  // normal points up, away from the floor
  std::vector<int> segments;
};

/// `eligible[i]` false removes segment i from layout candidacy (object segments).
FloorFit extract_floor(std::span<const Segment> segments, const Vec3& gravity, const ParseConfig& cfg,
                       const std::vector<char>& eligible = {});

/// Manual seeding: grow the floor / a wall from a user-chosen segment.
FloorFit floor_from_seed(std::span<const Segment> segments, int seed, const Vec3& gravity, const ParseConfig& cfg,
                         const std::vector<char>& eligible = {});
Wall wall_from_seed(std::span<const Segment> segments, int seed, const FloorFit& floor, const ParseConfig& cfg,
                    const std::vector<char>& eligible = {});

/// Sum over candidates and both walls of exp(-(n_p . n_i)^2).
double score_wall_pair(const Vec3& n1, const Vec3& n2, std::span<const Vec3> candidate_normals);

std::vector<Wall> extract_walls(std::span<const Segment> segments, const FloorFit& floor, const ParseConfig& cfg,
                                const std::vector<char>& eligible = {},
                                std::vector<std::string>* warnings = nullptr);

/// Up-right box for an object's points. `normals` may be empty (no exclusion) or
/// parallel to `points`.
Cuboid fit_object_cuboid(std::span<const Vec3> points, std::span<const Vec3> normals, const Plane& floor,
                         const ParseConfig& cfg = {}, std::vector<std::string>* warnings = nullptr);

struct SceneParse {
  RoomLayout layout;
  std::vector<Cuboid> cuboids;  // one per object mask, same order
  std::vector<std::string> warnings;
};

/// min_wall_points is stated for 640x480 frames; this rescales it to the frame size.
ParseConfig scaled_for(const ParseConfig& cfg, int width, int height);

/// Object masks are given as lists of indices into `segments`.
SceneParse parse_scene(const RgbdFrame& frame, std::span<const Segment> segments,
                       const std::vector<std::vector<int>>& object_masks, const ParseConfig& cfg = {});

/// Points and normals of a union of segments.
void gather_points(std::span<const Segment> segments, std::span<const int> members, std::vector<Vec3>& points,
                   std::vector<Vec3>& normals);

/// Marks floor / wall segments of `layout` in place.
void tag_layout(std::vector<Segment>& segments, const RoomLayout& layout);

}  // namespace rgbdann
