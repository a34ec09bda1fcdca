#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rgbdann/frame.hpp"
#include "rgbdann/geometry.hpp"
#include "rgbdann/image.hpp"

namespace rgbdann {

struct StructureGraph;

enum class SegmentTag { unlabeled, floor, wall, object };

/// s_i: pixels (row-major linear indices, ascending), back-projected points of the
/// valid-depth pixels with their per-pixel normals, fitted plane and normal.
struct Segment {
  int id = 0;
  std::vector<int> pixels;
  std::vector<Vec3> points;
  std::vector<Vec3> point_normals;
  std::optional<Plane> plane;
  Vec3 normal = -Vec3::UnitZ();  // toward the camera
  SegmentTag tag = SegmentTag::unlabeled;
  int owner = -1;  // object node id when tag == object
  std::optional<std::string> label;

  bool operator==(const Segment& o) const {
    return id == o.id && pixels == o.pixels && tag == o.tag && owner == o.owner && label == o.label;
  }
};

/// Unit normals toward the camera; the zero vector marks invalid pixels.
using NormalMap = Image<Vec3>;

NormalMap compute_normals(const RgbdFrame& frame, int window = 5);

/// Per-channel (n + 1) / 2 color coding of a normal map.
Image<Rgb> encode_normals(const NormalMap& normals);

/// Graph-based region merging on an 8-connected pixel grid. Labels are 0..n-1 in
/// raster order of first appearance.
Image<int> graph_segment(const Image<Rgb>& image, double k, int min_size);

struct OversegmentOptions {
  double k_color = 300.0;
  double k_normal = 200.0;
  int min_size = 50;
  RansacOptions ransac = plane_ransac_defaults();
};

/// Intersection of the color and normal-map segmentations, small regions merged into
/// their most similar neighbor. Segments partition the image; ids follow raster order.
std::vector<Segment> oversegment(const RgbdFrame& frame, const NormalMap& normals,
                                 const OversegmentOptions& opts = {});

/// Builds a segment from its pixels (plane fitted when the points span one).
Segment make_segment(int id, std::vector<int> pixels, const RgbdFrame& frame, const NormalMap& normals,
                     const RansacOptions& ransac = plane_ransac_defaults());

/// Pixel -> index into `segments` (-1 where no segment covers the pixel).
Image<int> label_image(std::span<const Segment> segments, int width, int height);

struct Scribble {
  enum class Kind { foreground, background };
  std::vector<std::array<int, 2>> polyline;  // (x, y)
  Kind kind = Kind::foreground;
  bool operator==(const Scribble&) const = default;
};

struct ScribbleResult {
  std::vector<int> segments;  // indices into the input span, ascending
  std::vector<int> pixels;    // ascending linear indices
  std::vector<std::string> warnings;
};

/// Pixels covered by the polyline (straight runs between consecutive vertices).
std::vector<int> rasterize_scribble(const Scribble& s, int width, int height);

ScribbleResult scribble_segment(const RgbdFrame& frame, std::span<const Segment> segments,
                                std::span<const Scribble> strokes);

/// Object masks from a ground-truth id image (0 = no object): each segment goes to the id
/// holding most of its pixels, lower id on ties; an object left empty takes its largest share.
std::map<int, std::vector<int>> majority_masks(const Image<int>& ids, std::span<const int> objects,
                                               std::span<const Segment> segments);

/// Re-assigns object segments from the cuboids of a finished graph, deepest nodes first.
std::vector<Segment> refine_segments(const StructureGraph& graph, std::vector<Segment> segments,
                                     const RgbdFrame& frame);

}  // namespace rgbdann
