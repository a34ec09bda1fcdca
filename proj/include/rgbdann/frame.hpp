#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rgbdann/geometry.hpp"
#include "rgbdann/image.hpp"

namespace rgbdann {

struct Intrinsics {
  double fx = 525.0, fy = 525.0, cx = 319.5, cy = 239.5;

  Vec3 backproject(double u, double v, double depth) const {
    return {(u - cx) * depth / fx, (v - cy) * depth / fy, depth};
  }
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
  bool operator==(const Intrinsics&) const = default;
};

/// Registered color + depth with calibration. Depth is held in meters (0 = invalid);
/// on disk it is 16-bit millimeters and converted exactly once, at load.
struct RgbdFrame {
  std::string frame_id;
  Image<Rgb> color;
  Image<float> depth;
  Intrinsics intrinsics;
  Vec3 gravity = Vec3::UnitY();
  Vec3 viewpoint = Vec3::Zero();

  int width() const { return color.width(); }
  int height() const { return color.height(); }
  bool valid(int x, int y) const { return depth(x, y) > 0.0f; }
  Vec3 point(int x, int y) const { return intrinsics.backproject(x, y, depth(x, y)); }
};

inline float depth_from_millimeters(std::uint16_t mm) { return static_cast<float>(mm) / 1000.0f; }
std::uint16_t depth_to_millimeters(float meters);

inline constexpr int kFrameSchemaVersion = 1;

/// Reads color.png, depth.png and meta.json from a frame directory. Gravity that is
/// not unit length is normalized and reported through `warnings`.
RgbdFrame load_frame(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr);
void save_frame(const RgbdFrame& frame, const std::filesystem::path& dir);

/// PNG encoding of the color raster (used by the HTTP service).
std::vector<unsigned char> encode_color_png(const Image<Rgb>& color);

}  // namespace rgbdann
