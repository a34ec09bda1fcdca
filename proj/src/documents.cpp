#include "rgbdann/documents.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

#include "rgbdann/error.hpp"

namespace rgbdann {

using nlohmann::json;

namespace {

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

template <int N>
Eigen::Matrix<double, N, 1> read_vec(const json& j) {
  if (!j.is_array() || j.size() != N) throw Error(Errc::bad_metadata, "expected a " + std::to_string(N) + "-vector");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

RleMask encode_rle(const std::vector<int>& pixels, int width, int height) {
  RleMask m{width, height, {}};
  const int total = width * height;
  int pos = 0;
  std::size_t i = 0;
  while (pos < total || m.runs.empty()) {
    int bg = 0;
    while (pos < total && (i >= pixels.size() || pixels[i] != pos)) {
      ++bg;
      ++pos;
    }
    int fg = 0;
    while (pos < total && i < pixels.size() && pixels[i] == pos) {
      ++fg;
      ++pos;
      ++i;
    }
    m.runs.push_back(bg);
    if (fg > 0) m.runs.push_back(fg);
    if (pos >= total) break;
  }
  if (i != pixels.size()) throw Error(Errc::invariant_violation, "mask pixels must be ascending and in bounds");
  return m;
}

std::vector<int> decode_rle(const RleMask& mask) {
  std::vector<int> out;
  int pos = 0;
  for (std::size_t k = 0; k < mask.runs.size(); ++k) {
    if (mask.runs[k] < 0) throw Error(Errc::bad_metadata, "negative run length");
    if (k % 2 == 1)
      for (int r = 0; r < mask.runs[k]; ++r) out.push_back(pos + r);
    pos += mask.runs[k];
  }
  if (pos != mask.width * mask.height) throw Error(Errc::bad_metadata, "run lengths do not cover the mask");
  return out;
}

void to_json(json& j, const Plane& p) { j = {{"normal", vec(p.normal)}, {"offset", p.offset}}; }
void from_json(const json& j, Plane& p) {
  p.normal = read_vec<3>(j.at("normal"));
  p.offset = j.at("offset").get<double>();
}

void to_json(json& j, const Cuboid& c) {
  j = {{"center", vec(c.center)}, {"up", vec(c.up)}, {"forward", vec(c.forward)}, {"half_extents", vec(c.half_extents)}};
}
void from_json(const json& j, Cuboid& c) {
  c.center = read_vec<3>(j.at("center"));
  c.up = read_vec<3>(j.at("up"));
  c.forward = read_vec<3>(j.at("forward"));
  c.half_extents = read_vec<3>(j.at("half_extents"));
}

void to_json(json& j, const Rect2& r) {
  j = {{"center", vec(r.center)}, {"axis", vec(r.axis)}, {"half_extents", vec(r.half_extents)}};
}
void from_json(const json& j, Rect2& r) {
  r.center = read_vec<2>(j.at("center"));
  r.axis = read_vec<2>(j.at("axis"));
  r.half_extents = read_vec<2>(j.at("half_extents"));
}

void to_json(json& j, const FloorFrame& f) {
  j = {{"origin", vec(f.origin)}, {"up", vec(f.up)}, {"e1", vec(f.e1)}, {"e2", vec(f.e2)}};
}
void from_json(const json& j, FloorFrame& f) {
  f.origin = read_vec<3>(j.at("origin"));
  f.up = read_vec<3>(j.at("up"));
  f.e1 = read_vec<3>(j.at("e1"));
  f.e2 = read_vec<3>(j.at("e2"));
}

void to_json(json& j, const Edge& e) { j = json::array({e.parent, e.child}); }
void from_json(const json& j, Edge& e) {
  e.parent = j.at(0).get<int>();
  e.child = j.at(1).get<int>();
}

void to_json(json& j, const SGNode& n) {
  j = {{"id", n.id},
       {"segments", n.segments},
       {"cuboid", n.cuboid},
       {"rect", n.rect},
       {"wall_contact", n.wall_contact},
       {"wall_align", n.wall_align},
       {"label", n.label ? json(*n.label) : json(nullptr)},
       {"suggestions", n.suggestions}};
}
void from_json(const json& j, SGNode& n) {
  n.id = j.at("id").get<int>();
  n.segments = j.at("segments").get<std::vector<int>>();
  n.cuboid = j.at("cuboid").get<Cuboid>();
  n.rect = j.at("rect").get<Rect2>();
  n.wall_contact = j.at("wall_contact").get<bool>();
  n.wall_align = j.at("wall_align").get<bool>();
  n.label.reset();
  if (!j.at("label").is_null()) n.label = j.at("label").get<std::string>();
  n.suggestions = j.at("suggestions").get<std::vector<std::string>>();
}

void to_json(json& j, const StructureGraph& g) { j = {{"frame", g.frame}, {"nodes", g.nodes}, {"edges", g.edges}}; }
void from_json(const json& j, StructureGraph& g) {
  g.frame = j.at("frame").get<FloorFrame>();
  g.nodes = j.at("nodes").get<std::vector<SGNode>>();
  g.edges = j.at("edges").get<std::vector<Edge>>();
}

void to_json(json& j, const RoomLayout& l) {
  json walls = json::array();
  for (const Wall& w : l.walls) walls.push_back({{"plane", w.plane}, {"segments", w.segments}});
  j = {{"floor", l.floor}, {"floor_segments", l.floor_segments}, {"floor_up", vec(l.floor_up)}, {"walls", walls}};
}
void from_json(const json& j, RoomLayout& l) {
  l.floor = j.at("floor").get<Plane>();
  l.floor_segments = j.at("floor_segments").get<std::vector<int>>();
  l.floor_up = read_vec<3>(j.at("floor_up"));
  l.walls.clear();
  for (const json& w : j.at("walls"))
    l.walls.push_back({w.at("plane").get<Plane>(), w.at("segments").get<std::vector<int>>()});
}

void to_json(json& j, const RleMask& m) { j = {{"width", m.width}, {"height", m.height}, {"runs", m.runs}}; }
void from_json(const json& j, RleMask& m) {
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.runs = j.at("runs").get<std::vector<int>>();
}

void to_json(json& j, const ObjectRecord& o) {
  j = {{"id", o.id},           {"label", o.label},           {"mask", o.mask},
       {"cuboid", o.cuboid},   {"wall_contact", o.wall_contact}, {"wall_align", o.wall_align}};
}
void from_json(const json& j, ObjectRecord& o) {
  o.id = j.at("id").get<int>();
  o.label = j.at("label").get<std::string>();
  o.mask = j.at("mask").get<RleMask>();
  o.cuboid = j.at("cuboid").get<Cuboid>();
  o.wall_contact = j.at("wall_contact").get<bool>();
  o.wall_align = j.at("wall_align").get<bool>();
}

void to_json(json& j, const AnnotationRecord& r) {
  j = {{"frame_id", r.frame_id}, {"layout", r.layout}, {"objects", r.objects}, {"edges", r.edges}};
}
void from_json(const json& j, AnnotationRecord& r) {
  r.frame_id = j.at("frame_id").get<std::string>();
  r.layout = j.at("layout").get<RoomLayout>();
  r.objects = j.at("objects").get<std::vector<ObjectRecord>>();
  r.edges = j.at("edges").get<std::vector<Edge>>();
}

void to_json(json& j, const NodeGeometry& g) {
  j = {{"id", g.id}, {"cuboid", g.cuboid}, {"rect", g.rect}, {"wall_contact", g.wall_contact}, {"wall_align", g.wall_align}};
}
void from_json(const json& j, NodeGeometry& g) {
  g.id = j.at("id").get<int>();
  g.cuboid = j.at("cuboid").get<Cuboid>();
  g.rect = j.at("rect").get<Rect2>();
  g.wall_contact = j.at("wall_contact").get<bool>();
  g.wall_align = j.at("wall_align").get<bool>();
}

void to_json(json& j, const RefinementEvent& e) {
  j = {{"kind", std::string(to_string(e.kind))},
       {"node", e.node},
       {"before", e.before},
       {"after", e.after},
       {"edges_before", e.edges_before},
       {"edges_after", e.edges_after},
       {"notes", e.notes}};
}
void from_json(const json& j, RefinementEvent& e) {
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.node = j.at("node").get<int>();
  e.before = j.at("before").get<std::vector<NodeGeometry>>();
  e.after = j.at("after").get<std::vector<NodeGeometry>>();
  e.edges_before = j.at("edges_before").get<std::vector<Edge>>();
  e.edges_after = j.at("edges_after").get<std::vector<Edge>>();
  e.notes = j.at("notes").get<std::vector<std::string>>();
}

void to_json(json& j, const PriorModel& m) {
  json samples = json::object();
  for (const auto& [c, feats] : m.samples) {
    json list = json::array();
    for (const auto& f : feats) list.push_back(vec(f));
    samples[c] = list;
  }
  json support = json::array();
  for (const auto& [key, n] : m.support_counts)
    support.push_back({{"parent", key.first}, {"child", key.second}, {"edges", n.edges}, {"cooccurrences", n.cooccurrences}});
  json spatial = json::object();
  for (const auto& [c, n] : m.spatial_counts)
    spatial[c] = {{"nodes", n.nodes}, {"contact", n.contact}, {"align", n.align}};
  json gaussians = json::object();
  for (const auto& [c, g] : m.geometric.classes)
    gaussians[c] = {{"mean", vec(g.mean)}, {"cov", {g.cov(0, 0), g.cov(0, 1), g.cov(1, 0), g.cov(1, 1)}}};
  j = {{"categories", m.category_list},
       {"config",
        {{"enrich_count", m.config.enrich_count},
         {"seed", m.config.seed},
         {"area_sigma", m.config.enrich.area_sigma},
         {"height_sigma", m.config.enrich.height_sigma},
         {"min_value", m.config.enrich.min_value}}},
       {"graphs", m.graphs},
       {"samples", samples},
       {"support_counts", support},
       {"spatial_counts", spatial},
       {"gaussians", gaussians},
       {"O_c", m.o_c},
       {"O_p", m.o_p},
       {"O_s", m.o_s}};
}

void from_json(const json& j, PriorModel& m) {
  m.category_list = j.at("categories").get<std::vector<std::string>>();
  const json& cfg = j.at("config");
  m.config.enrich_count = cfg.at("enrich_count").get<int>();
  m.config.seed = cfg.at("seed").get<std::uint64_t>();
  m.config.enrich.area_sigma = cfg.at("area_sigma").get<double>();
  m.config.enrich.height_sigma = cfg.at("height_sigma").get<double>();
  m.config.enrich.min_value = cfg.at("min_value").get<double>();
  m.graphs = j.at("graphs").get<std::size_t>();
  m.samples.clear();
  for (const auto& [c, list] : j.at("samples").items())
    for (const json& f : list) m.samples[c].push_back(read_vec<2>(f));
  m.support_counts.clear();
  for (const json& s : j.at("support_counts"))
    m.support_counts[{s.at("parent").get<std::string>(), s.at("child").get<std::string>()}] = {
        s.at("edges").get<long>(), s.at("cooccurrences").get<long>()};
  m.spatial_counts.clear();
  for (const auto& [c, n] : j.at("spatial_counts").items())
    m.spatial_counts[c] = {n.at("nodes").get<long>(), n.at("contact").get<long>(), n.at("align").get<long>()};
  m.refit();
}

bool AnnotationRecord::operator==(const AnnotationRecord& o) const { return canonical_text(*this) == canonical_text(o); }

void check_invariants(const AnnotationRecord& r) {
  std::set<int> ids;
  for (const ObjectRecord& o : r.objects) {
    if (o.id == kFloorId || !ids.insert(o.id).second)
      throw Error(Errc::invariant_violation, "object id " + std::to_string(o.id) + " is reserved or duplicated");
  }
  std::set<int> children;
  for (const Edge& e : r.edges) {
    if ((e.parent != kFloorId && !ids.contains(e.parent)) || !ids.contains(e.child))
      throw Error(Errc::invariant_violation,
                  "edge (" + std::to_string(e.parent) + ", " + std::to_string(e.child) + ") references a missing object");
    if (!children.insert(e.child).second)
      throw Error(Errc::invariant_violation, "object " + std::to_string(e.child) + " has two parents");
  }
  std::set<int> covered;
  for (const ObjectRecord& o : r.objects)
    for (int p : decode_rle(o.mask))
      if (!covered.insert(p).second) throw Error(Errc::invariant_violation, "object masks overlap");
}

json make_document(const std::string& kind, json body) {
  return {{"schema_version", kDocumentSchemaVersion}, {"kind", kind}, {"body", std::move(body)}};
}

json open_document(const json& doc, const std::string& kind) {
  if (!doc.contains("schema_version") || doc.at("schema_version") != kDocumentSchemaVersion)
    throw Error(Errc::schema_version_mismatch,
                "expected schema_version " + std::to_string(kDocumentSchemaVersion) + " in " + kind + " document");
  if (doc.value("kind", "") != kind) throw Error(Errc::bad_metadata, "document kind is not '" + kind + "'");
  return doc.at("body");
}

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw Error(Errc::io_failure, "write failed for " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::bad_metadata, path.string() + ": " + e.what());
  }
}

namespace {
template <typename T>
T parse_body(const json& body, const std::string& kind) {
  try {
    return body.get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::bad_metadata, kind + ": " + e.what());
  }
}
}  // namespace

void save_annotation(const AnnotationRecord& record, const std::filesystem::path& path) {
  check_invariants(record);
  write_json(make_document("annotation", record), path);
}

AnnotationRecord load_annotation(const std::filesystem::path& path) {
  return parse_body<AnnotationRecord>(open_document(read_json(path), "annotation"), "annotation");
}

void save_graph(const StructureGraph& g, const std::filesystem::path& path) {
  write_json(make_document("structure_graph", g), path);
}

StructureGraph load_graph(const std::filesystem::path& path) {
  return parse_body<StructureGraph>(open_document(read_json(path), "structure_graph"), "structure_graph");
}

void save_model(const PriorModel& model, const std::filesystem::path& path) {
  write_json(make_document("prior_model", model), path);
}

PriorModel load_model(const std::filesystem::path& path) {
  return parse_body<PriorModel>(open_document(read_json(path), "prior_model"), "prior_model");
}

std::string canonical_text(const AnnotationRecord& record) { return json(record).dump(); }

std::size_t content_hash(const AnnotationRecord& record) { return std::hash<std::string>{}(canonical_text(record)); }

std::size_t content_hash(const PriorModel& model) { return std::hash<std::string>{}(json(model).dump()); }

}  // namespace rgbdann
