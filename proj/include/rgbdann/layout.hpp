#pragma once

#include <optional>
#include <vector>

#include "rgbdann/geometry.hpp"

namespace rgbdann {

/// Angle / distance tolerances shared by layout extraction and graph reasoning.
struct ParseConfig {
  double angle_tol_deg = 30.0;  // a_T
  double dist_tol = 0.15;       // d_T, meters
  RansacOptions plane_ransac = plane_ransac_defaults();
  RansacOptions line_ransac = line_ransac_defaults();
  std::size_t min_wall_points = 2000;
  double hull_band = 0.02;
  double seed_percentile = 0.05;
};

// Fixed ratios of the support / refinement rules.
inline constexpr double kSupportOverlapRatio = 0.3;
inline constexpr double kConstraintRatio = 0.7;
inline constexpr double kFloorSupportRatio = 0.7;
inline constexpr double kStrongSupport = 0.7;
inline constexpr double kOverExpansionRatio = 0.3;
inline constexpr double kNearbyDiagonalRatio = 0.5;
inline constexpr double kAbsorbRatio = 0.8;
inline constexpr double kAbsorbInflation = 0.01;

struct Wall {
  Plane plane;  // normal points into the room (toward the camera)
  std::vector<int> segments;
};

struct RoomLayout {
  Plane floor;  // normal == floor_up
  std::vector<int> floor_segments;
  std::vector<Wall> walls;
  Vec3 floor_up = Vec3::UnitZ();

  FloorFrame frame(const Vec3& camera = Vec3::Zero()) const {
    std::optional<Vec3> w;
    if (!walls.empty()) w = walls.front().plane.normal;
    return FloorFrame::make(floor, w, camera);
  }
};

}  // namespace rgbdann
