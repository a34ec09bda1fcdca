#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "rgbdann/error.hpp"
#include "rgbdann/frame.hpp"
#include "rgbdann/geometry.hpp"

namespace testing {

// Seeded case generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  double angle() { return uniform(-M_PI, M_PI); }
  rgbdann::Vec3 unit() {
    std::normal_distribution<double> n;
    rgbdann::Vec3 v(n(rng_), n(rng_), n(rng_));
    return v.normalized();
  }
  rgbdann::Vec3 box_point(double extent) { return {uniform(-extent, extent), uniform(-extent, extent), uniform(-extent, extent)}; }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Up-right box on the z = 0 floor convention, yaw about +z.
inline rgbdann::Cuboid box(double x, double y, double bottom, double len, double wid, double hgt, double yaw = 0.0) {
  rgbdann::Cuboid c;
  c.up = rgbdann::Vec3::UnitZ();
  c.forward = rgbdann::Vec3(std::cos(yaw), std::sin(yaw), 0.0);
  c.half_extents = rgbdann::Vec3(len / 2, wid / 2, hgt / 2);
  c.center = rgbdann::Vec3(x, y, bottom + hgt / 2);
  return c;
}

inline rgbdann::Cuboid random_box(Gen& g, double spread = 2.0) {
  return box(g.uniform(-spread, spread), g.uniform(-spread, spread), g.uniform(0.0, 1.0), g.uniform(0.1, 1.5),
             g.uniform(0.1, 1.5), g.uniform(0.1, 1.5), g.angle());
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("rgbdann-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

template <typename F>
rgbdann::Errc error_code(F&& f) {
  try {
    f();
  } catch (const rgbdann::Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected an rgbdann::Error");
}

}  // namespace testing
