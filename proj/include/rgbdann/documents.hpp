#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgbdann/layout.hpp"
#include "rgbdann/priors.hpp"
#include "rgbdann/refine.hpp"
#include "rgbdann/structure_graph.hpp"

namespace rgbdann {

inline constexpr int kDocumentSchemaVersion = 1;

/// Row-major run lengths alternating background / foreground, first run background
/// (possibly 0).
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<int> runs;
  bool operator==(const RleMask&) const = default;
};

RleMask encode_rle(const std::vector<int>& pixels, int width, int height);
std::vector<int> decode_rle(const RleMask& mask);

struct ObjectRecord {
  int id = 0;
  std::string label;
  RleMask mask;
  Cuboid cuboid;
  bool wall_contact = false;
  bool wall_align = false;
  bool operator==(const ObjectRecord&) const = default;
};

struct AnnotationRecord {
  std::string frame_id;
  RoomLayout layout;
  std::vector<ObjectRecord> objects;
  std::vector<Edge> edges;
  bool operator==(const AnnotationRecord& o) const;
};

/// Throws InvariantViolation for dangling edge ids, overlapping masks, duplicate ids
/// or children with two parents.
void check_invariants(const AnnotationRecord& record);

void save_annotation(const AnnotationRecord& record, const std::filesystem::path& path);
AnnotationRecord load_annotation(const std::filesystem::path& path);

void save_graph(const StructureGraph& g, const std::filesystem::path& path);
StructureGraph load_graph(const std::filesystem::path& path);

void save_model(const PriorModel& model, const std::filesystem::path& path);
PriorModel load_model(const std::filesystem::path& path);

/// Canonical text of a document and a hash of it, for replay comparisons.
std::string canonical_text(const AnnotationRecord& record);
std::size_t content_hash(const AnnotationRecord& record);
std::size_t content_hash(const PriorModel& model);

/// Wraps a document body with its kind and schema version.
nlohmann::json make_document(const std::string& kind, nlohmann::json body);
/// Validates kind and version and returns the body.
nlohmann::json open_document(const nlohmann::json& doc, const std::string& kind);
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Plane& p);
void from_json(const nlohmann::json& j, Plane& p);
void to_json(nlohmann::json& j, const Cuboid& c);
void from_json(const nlohmann::json& j, Cuboid& c);
void to_json(nlohmann::json& j, const Rect2& r);
void from_json(const nlohmann::json& j, Rect2& r);
void to_json(nlohmann::json& j, const FloorFrame& f);
void from_json(const nlohmann::json& j, FloorFrame& f);
void to_json(nlohmann::json& j, const Edge& e);
void from_json(const nlohmann::json& j, Edge& e);
void to_json(nlohmann::json& j, const SGNode& n);
void from_json(const nlohmann::json& j, SGNode& n);
void to_json(nlohmann::json& j, const StructureGraph& g);
void from_json(const nlohmann::json& j, StructureGraph& g);
void to_json(nlohmann::json& j, const RoomLayout& l);
void from_json(const nlohmann::json& j, RoomLayout& l);
void to_json(nlohmann::json& j, const RleMask& m);
void from_json(const nlohmann::json& j, RleMask& m);
void to_json(nlohmann::json& j, const ObjectRecord& o);
void from_json(const nlohmann::json& j, ObjectRecord& o);
void to_json(nlohmann::json& j, const AnnotationRecord& r);
void from_json(const nlohmann::json& j, AnnotationRecord& r);
void to_json(nlohmann::json& j, const NodeGeometry& g);
void from_json(const nlohmann::json& j, NodeGeometry& g);
void to_json(nlohmann::json& j, const RefinementEvent& e);
void from_json(const nlohmann::json& j, RefinementEvent& e);
void to_json(nlohmann::json& j, const PriorModel& m);
void from_json(const nlohmann::json& j, PriorModel& m);

}  // namespace rgbdann
