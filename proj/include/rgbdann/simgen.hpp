#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <set>
#include <string>
#include <vector>

#include "rgbdann/documents.hpp"
#include "rgbdann/frame.hpp"
#include "rgbdann/priors.hpp"
#include "rgbdann/segmentation.hpp"
#include "rgbdann/structure_graph.hpp"

namespace rgbdann {

/// Placement rule and appearance of one synthetic category.
struct CategoryRule {
  std::string name;
  Vec3 size;  // length (forward), width, height in meters
  bool on_floor = true;
  bool against_wall = true;
  std::vector<std::string> parents;  // supporting categories for objects off the floor
  double weight = 1.0;
  int max_per_scene = 3;
  Rgb color;
};

std::vector<CategoryRule> default_categories();
std::vector<std::string> category_names(const std::vector<CategoryRule>& rules);
/// Nominal (area, height) per category, as written to the catalog file.
SizeCatalog catalog_from(const std::vector<CategoryRule>& rules);

/// Boxes live in a world frame with the floor at z = 0 and walls on x = 0 and y = 0.
struct ObjectSpec {
  int id = 0;
  std::string category;
  Vec2 center = Vec2::Zero();
  double yaw = 0.0;  // radians, forward = (cos, sin, 0)
  Vec3 size = Vec3::Ones();
  int parent = kFloorId;
  double base = 0.0;         // bottom height
  double hidden_below = 0.0;  // pixels of this object below this height are dropped
  Rgb color;
};

struct SceneSpec {
  std::string frame_id = "synthetic";
  double room_x = 4.0, room_y = 4.0, room_height = 2.8;
  Vec3 camera_position{3.7, 3.7, 2.1};
  Vec3 camera_target{1.0, 1.0, 0.4};
  Intrinsics intrinsics{262.0, 262.0, 159.5, 119.5};
  int width = 320, height = 240;
  double noise_k = 0.0;  // depth sigma = k * z^2
  std::uint64_t noise_seed = 0;
  std::vector<ObjectSpec> objects;
};

struct SyntheticScene {
  SceneSpec spec;
  RgbdFrame frame;
  AnnotationRecord truth;
  StructureGraph truth_graph;
  Image<int> object_ids;  // visible object id per pixel, 0 elsewhere
  std::vector<double> coverage;    // per object: visible extent / true extent, worst axis
  std::vector<int> visible_pixels;  // per object
  std::uint64_t seed = 0;
};

struct GeneratorParams {
  std::vector<CategoryRule> categories = default_categories();
  std::set<std::string> allowed;  // empty = all
  int min_objects = 2;
  int max_objects = 8;
  double occlusion_rate = 0.0;  // chance that a floor object loses its lower part
  double noise_k = 0.0;
  int max_retries = 200;
  double min_coverage = 0.9;  // visible extent / true extent, per axis
};

SyntheticScene render_scene(const SceneSpec& spec);
SceneSpec sample_layout(const GeneratorParams& params, std::uint64_t seed);
SyntheticScene generate_scene(const GeneratorParams& params, std::uint64_t seed);

/// Cuboid of an object in camera coordinates.
Cuboid camera_cuboid(const SceneSpec& spec, const ObjectSpec& o);
/// True when every object is in view and enough of it is visible.
bool objects_visible(const SyntheticScene& scene, double min_coverage, int min_pixels = 60);

/// Bed against the back wall with two pillows and a night stand hidden behind it.
SceneSpec two_click_scene();

/// Stand-in for perfect scribbles, see majority_masks.
std::map<int, std::vector<int>> simulated_masks(const SyntheticScene& scene, std::span<const Segment> segments);

}  // namespace rgbdann
