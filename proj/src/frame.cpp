#include "rgbdann/frame.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <json.hpp>

#include "rgbdann/error.hpp"

namespace rgbdann {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint16_t depth_to_millimeters(float meters) {
  if (!(meters > 0.0f)) return 0;
  const double mm = std::round(static_cast<double>(meters) * 1000.0);
  return static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
}

namespace {

fs::path require_file(const fs::path& dir, const char* name) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) throw Error(Errc::missing_file, p.string());
  return p;
}

double require_positive(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number()) throw Error(Errc::bad_metadata, std::string("intrinsics.") + field);
  const double v = j[field].get<double>();
  if (field[0] == 'f' && !(v > 0.0)) throw Error(Errc::bad_metadata, std::string("intrinsics.") + field + " must be > 0");
  return v;
}

}  // namespace

RgbdFrame load_frame(const fs::path& dir, std::vector<std::string>* warnings) {
  const auto color_path = require_file(dir, "color.png");
  const auto depth_path = require_file(dir, "depth.png");
  const auto meta_path = require_file(dir, "meta.json");

  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::bad_metadata, std::string("meta.json: ") + e.what());
  }
  if (meta.value("schema_version", 0) != kFrameSchemaVersion)
    throw Error(Errc::schema_version_mismatch, "meta.json schema_version");

  RgbdFrame f;
  f.frame_id = meta.value("frame_id", dir.filename().string());
  if (!meta.contains("intrinsics") || !meta["intrinsics"].is_object()) throw Error(Errc::bad_metadata, "intrinsics");
  const auto& k = meta["intrinsics"];
  f.intrinsics = {require_positive(k, "fx"), require_positive(k, "fy"), require_positive(k, "cx"),
                  require_positive(k, "cy")};
  if (!meta.contains("gravity") || !meta["gravity"].is_array() || meta["gravity"].size() != 3)
    throw Error(Errc::bad_metadata, "gravity");
  Vec3 g(meta["gravity"][0].get<double>(), meta["gravity"][1].get<double>(), meta["gravity"][2].get<double>());
  if (!(g.norm() > 1e-12)) throw Error(Errc::bad_metadata, "gravity has zero length");
  if (std::abs(g.norm() - 1.0) > 1e-6) {
    if (warnings) warnings->push_back("gravity normalized from length " + std::to_string(g.norm()));
    g.normalize();
  }
  f.gravity = g;

  const cv::Mat color = cv::imread(color_path.string(), cv::IMREAD_COLOR);
  const cv::Mat depth = cv::imread(depth_path.string(), cv::IMREAD_UNCHANGED);
  if (color.empty()) throw Error(Errc::io_failure, color_path.string());
  if (depth.empty()) throw Error(Errc::io_failure, depth_path.string());
  if (depth.type() != CV_16UC1) throw Error(Errc::bad_metadata, "depth must be a 16-bit single-channel raster");
  if (color.cols != depth.cols || color.rows != depth.rows)
    throw Error(Errc::dimension_mismatch, "color " + std::to_string(color.cols) + "x" + std::to_string(color.rows) +
                                              " vs depth " + std::to_string(depth.cols) + "x" +
                                              std::to_string(depth.rows));

  f.color = Image<Rgb>(color.cols, color.rows);
  f.depth = Image<float>(color.cols, color.rows);
  for (int y = 0; y < color.rows; ++y) {
    for (int x = 0; x < color.cols; ++x) {
      const auto bgr = color.at<cv::Vec3b>(y, x);
      f.color(x, y) = {bgr[2], bgr[1], bgr[0]};
      f.depth(x, y) = depth_from_millimeters(depth.at<std::uint16_t>(y, x));
    }
  }
  return f;
}

void save_frame(const RgbdFrame& frame, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  cv::Mat color(frame.height(), frame.width(), CV_8UC3);
  cv::Mat depth(frame.height(), frame.width(), CV_16UC1);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const auto c = frame.color(x, y);
      color.at<cv::Vec3b>(y, x) = {c.b, c.g, c.r};
      depth.at<std::uint16_t>(y, x) = depth_to_millimeters(frame.depth(x, y));
    }
  }
  if (!cv::imwrite((dir / "color.png").string(), color) || !cv::imwrite((dir / "depth.png").string(), depth))
    throw Error(Errc::io_failure, "writing rasters under " + dir.string());

  json meta = {
      {"schema_version", kFrameSchemaVersion},
      {"frame_id", frame.frame_id},
      {"intrinsics",
       {{"fx", frame.intrinsics.fx}, {"fy", frame.intrinsics.fy}, {"cx", frame.intrinsics.cx}, {"cy", frame.intrinsics.cy}}},
      {"gravity", {frame.gravity.x(), frame.gravity.y(), frame.gravity.z()}},
  };
  std::ofstream out(dir / "meta.json");
  if (!out) throw Error(Errc::io_failure, (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

std::vector<unsigned char> encode_color_png(const Image<Rgb>& color) {
  cv::Mat m(color.height(), color.width(), CV_8UC3);
  for (int y = 0; y < color.height(); ++y)
    for (int x = 0; x < color.width(); ++x) {
      const auto c = color(x, y);
      m.at<cv::Vec3b>(y, x) = {c.b, c.g, c.r};
    }
  std::vector<unsigned char> buf;
  cv::imencode(".png", m, buf);
  return buf;
}

}  // namespace rgbdann
