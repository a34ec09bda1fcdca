#include "rgbdann/service.hpp"

#include <algorithm>

#include <httplib.h>

#include "rgbdann/error.hpp"
#include "rgbdann/evaluation.hpp"

namespace rgbdann {

using nlohmann::json;

namespace {

std::string_view tag_name(SegmentTag t) {
  switch (t) {
    case SegmentTag::unlabeled: return "unlabeled";
    case SegmentTag::floor: return "floor";
    case SegmentTag::wall: return "wall";
    case SegmentTag::object: return "object";
  }
  return "?";
}

bool plain_name(const std::string& s) {
  return !s.empty() && s != "." && s != ".." && s.find('/') == std::string::npos &&
         s.find('\\') == std::string::npos;
}

json error_body(const Error& e) {
  const std::string what = e.what();
  const std::string code(to_string(e.code()));
  const std::string message = what.rfind(code + ": ", 0) == 0 ? what.substr(code.size() + 2) : what;
  return {{"error", code}, {"message", message}};
}

std::vector<int> boundary_pixels(std::span<const Segment> segments, int w, int h) {
  const Image<int> labels = label_image(segments, w, h);
  std::vector<int> out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = labels(x, y);
      if ((x + 1 < w && labels(x + 1, y) != l) || (y + 1 < h && labels(x, y + 1) != l))
        out.push_back(static_cast<int>(labels.index(x, y)));
    }
  return out;
}

}  // namespace

int http_status(Errc code) {
  switch (code) {
    case Errc::not_found:
    case Errc::unknown_node:
    case Errc::missing_file: return 404;
    case Errc::invalid_action:
    case Errc::label_not_in_suggestions:
    case Errc::unknown_category:
    case Errc::no_op:
    case Errc::no_completed_sessions:
    case Errc::incomplete_assignment:
    case Errc::no_foreground: return 409;
    case Errc::bad_metadata:
    case Errc::schema_version_mismatch:
    case Errc::invariant_violation:
    case Errc::dimension_mismatch: return 400;
    default: return 500;
  }
}

json projected_cuboid(const Cuboid& c, const Intrinsics& k) {
  const auto corners = c.corners();
  std::array<std::optional<Vec2>, 8> uv;
  std::vector<Vec2> visible;
  for (int i = 0; i < 8; ++i)
    if (corners[i].z() > 1e-6) {
      uv[i] = k.project(corners[i]);
      visible.push_back(*uv[i]);
    }
  json polygon = json::array();
  if (visible.size() >= 3)
    for (const Vec2& p : convex_hull_2d(visible)) polygon.push_back({p.x(), p.y()});
  json edges = json::array();
  for (int a = 0; a < 8; ++a)
    for (int bit = 1; bit < 8; bit <<= 1) {
      const int b = a | bit;
      if (b == a || !uv[a] || !uv[b]) continue;
      edges.push_back({{uv[a]->x(), uv[a]->y()}, {uv[b]->x(), uv[b]->y()}});
    }
  return {{"polygon", polygon}, {"edges", edges}};
}

json node_state(const Session& s, const SGNode& n) {
  json j = {{"id", n.id},
            {"confirmed", s.is_confirmed(n.id)},
            {"label", n.label ? json(*n.label) : json(nullptr)},
            {"cuboid", n.cuboid},
            {"rect", n.rect},
            {"wall_contact", n.wall_contact},
            {"wall_align", n.wall_align},
            {"segments", n.segments},
            {"projection", projected_cuboid(n.cuboid, s.frame.intrinsics)}};
  const auto parent = s.graph.parent_of(n.id);
  j["parent"] = parent ? json(*parent) : json(nullptr);
  json list = json::array();
  auto it = s.suggestions.find(n.id);
  if (it != s.suggestions.end())
    for (const Suggestion& e : it->second.entries) list.push_back({{"label", e.label}, {"score", e.score}});
  j["suggestions"] = list;
  j["display_label"] = s.is_confirmed(n.id) ? json(s.confirmed.at(n.id))
                       : list.empty()       ? json(nullptr)
                                            : list.front()["label"];
  return j;
}

json session_state(const Session& s) {
  json segments = json::array();
  for (const Segment& seg : s.segments)
    segments.push_back({{"id", seg.id},
                        {"tag", tag_name(seg.tag)},
                        {"owner", seg.owner},
                        {"label", seg.label ? json(*seg.label) : json(nullptr)},
                        {"mask", encode_rle(seg.pixels, s.frame.width(), s.frame.height())}});
  json nodes = json::array();
  for (const SGNode& n : s.graph.nodes) nodes.push_back(node_state(s, n));
  json j = {{"id", s.id},
            {"frame_id", s.frame.frame_id},
            {"phase", to_string(s.phase)},
            {"width", s.frame.width()},
            {"height", s.frame.height()},
            {"model_hash", std::to_string(content_hash(*s.model))},
            {"layout", s.layout ? json(*s.layout) : json(nullptr)},
            {"segments", segments},
            {"nodes", nodes},
            {"edges", s.graph.edges},
            {"undo_depth", s.undo_stack.size()},
            {"actions", s.log.size()},
            {"warnings", s.warnings}};
  j["record"] = s.result ? json(*s.result) : json(nullptr);
  return j;
}

AnnotationService::AnnotationService(ServiceConfig config, std::shared_ptr<const PriorModel> model)
    : config_(std::move(config)), model_(std::move(model)) {
  if (!model_) throw Error(Errc::invariant_violation, "service needs a model");
  if (config_.results_dir.empty()) config_.results_dir = config_.data_dir / "annotations";
}

std::shared_ptr<const PriorModel> AnnotationService::snapshot() const {
  std::lock_guard lock(mutex_);
  return model_;
}

std::shared_ptr<AnnotationService::Slot> AnnotationService::slot(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(Errc::not_found, "session " + id);
  return it->second;
}

RgbdFrame AnnotationService::load(const std::string& frame_id) const {
  if (!plain_name(frame_id) || !std::filesystem::is_directory(config_.data_dir / frame_id))
    throw Error(Errc::not_found, "frame " + frame_id);
  RgbdFrame f = load_frame(config_.data_dir / frame_id);
  f.frame_id = frame_id;
  return f;
}

json AnnotationService::create_session(const json& body) {
  if (!body.is_object() || !body.contains("frame_id") || !body["frame_id"].is_string())
    throw Error(Errc::bad_metadata, "body needs a frame_id");
  const std::string frame_id = body["frame_id"].get<std::string>();
  RgbdFrame frame = load(frame_id);
  const auto truth_path = config_.data_dir / frame_id / "annotation.json";
  std::optional<AnnotationRecord> truth;
  if (std::filesystem::exists(truth_path)) truth = load_annotation(truth_path);

  std::string id;
  std::shared_ptr<const PriorModel> model;
  {
    std::lock_guard lock(mutex_);
    id = "s" + std::to_string(next_id_++);
    model = model_;
  }
  auto slot = std::make_shared<Slot>();
  slot->session = rgbdann::create_session(id, std::move(frame), model, config_.session);
  slot->truth = truth;
  if (body.value("ground_truth_masks", false)) {
    if (!truth) throw Error(Errc::not_found, "frame " + frame_id + " has no annotation.json");
    LabeledFrame lf;
    lf.object_ids = Image<int>(slot->session.frame.width(), slot->session.frame.height(), 0);
    std::vector<int> ids;
    for (const ObjectRecord& o : truth->objects) {
      ids.push_back(o.id);
      for (int px : decode_rle(o.mask)) lf.object_ids[px] = o.id;
    }
    provide_objects(slot->session, majority_masks(lf.object_ids, ids, slot->session.segments));
  }
  json state = session_state(slot->session);
  std::lock_guard lock(mutex_);
  sessions_[id] = slot;
  return state;
}

json AnnotationService::session(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  return session_state(s->session);
}

void AnnotationService::persist(const Session& s) const {
  const auto dir = config_.results_dir / s.id;
  std::filesystem::create_directories(dir);
  save_annotation(*s.result, dir / "annotation.json");
  write_json(action_log(s), dir / "actions.json");
}

json AnnotationService::act(const std::string& id, const json& body) {
  auto slot = this->slot(id);
  const UserAction action = body.get<UserAction>();
  std::lock_guard lock(slot->mutex);
  Session& s = slot->session;
  Session before = s;
  ActionResult r;
  try {
    r = apply_action(s, action);
  } catch (...) {
    s = std::move(before);  // failed actions leave no trace
    throw;
  }
  json changed = json::array();
  for (int node : r.changed_nodes) changed.push_back(node_state(s, s.graph.node(node)));
  json removed = json::array();
  for (const SGNode& n : before.graph.nodes)
    if (!s.graph.find(n.id)) removed.push_back(n.id);
  json delta = {{"session", s.id},
                {"action", action},
                {"phase", to_string(r.phase)},
                {"events", r.events},
                {"changed", changed},
                {"removed", removed},
                {"edges", s.graph.edges},
                {"undo_depth", s.undo_stack.size()}};
  if (before.segments != s.segments) {
    json segments = json::array();
    for (std::size_t i = 0; i < s.segments.size(); ++i)
      if (i >= before.segments.size() || !(before.segments[i] == s.segments[i]))
        segments.push_back({{"id", s.segments[i].id},
                            {"tag", tag_name(s.segments[i].tag)},
                            {"owner", s.segments[i].owner},
                            {"label", s.segments[i].label ? json(*s.segments[i].label) : json(nullptr)}});
    delta["segments"] = segments;
  }
  if (before.layout.has_value() != s.layout.has_value() ||
      (s.layout && json(*before.layout) != json(*s.layout)))
    delta["layout"] = s.layout ? json(*s.layout) : json(nullptr);
  if (s.phase == Phase::done) {
    persist(s);
    delta["record"] = *s.result;
  }
  return delta;
}

json AnnotationService::retrain(const json& body) {
  std::vector<std::shared_ptr<Slot>> chosen;
  {
    std::lock_guard lock(mutex_);
    if (body.is_object() && body.contains("sessions")) {
      for (const json& id : body["sessions"]) {
        auto it = sessions_.find(id.get<std::string>());
        if (it == sessions_.end()) throw Error(Errc::not_found, "session " + id.get<std::string>());
        chosen.push_back(it->second);
      }
    } else {
      for (const auto& [id, s] : sessions_) chosen.push_back(s);
    }
  }
  std::vector<StructureGraph> graphs;
  std::vector<std::string> labels;
  std::vector<std::shared_ptr<Slot>> used;
  for (const auto& slot : chosen) {
    std::lock_guard lock(slot->mutex);
    if (slot->session.phase != Phase::done || slot->trained) continue;
    graphs.push_back(truth_graph_of(*slot->session.result));
    for (const SGNode& n : graphs.back().nodes) labels.push_back(*n.label);
    used.push_back(slot);
  }
  if (graphs.empty()) throw Error(Errc::no_completed_sessions, "no finished session left to learn from");

  std::shared_ptr<const PriorModel> base = snapshot();
  PriorModel next = config_.session.allow_new_labels ? with_categories(*base, labels) : *base;
  next = retrain_incremental(next, graphs);
  auto fresh = std::make_shared<const PriorModel>(std::move(next));
  {
    std::lock_guard lock(mutex_);
    model_ = fresh;
  }
  for (const auto& slot : used) {
    std::lock_guard lock(slot->mutex);
    slot->trained = true;
  }
  return {{"model_hash", std::to_string(content_hash(*fresh))},
          {"graphs", fresh->graphs},
          {"added", graphs.size()},
          {"categories", fresh->category_list}};
}

json AnnotationService::metrics() const {
  std::vector<std::shared_ptr<Slot>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  TrialReport r;
  for (const auto& slot : all) {
    std::lock_guard lock(slot->mutex);
    const Session& s = slot->session;
    if (s.phase != Phase::done) continue;
    SceneOutcome o;
    o.objects = static_cast<int>(s.graph.nodes.size());
    for (const auto& [node, d] : s.decisions) {
      if (d.kind == UserAction::Kind::confirm) ++o.confirms;
      if (d.kind == UserAction::Kind::reorder) ++o.reorders;
      if (d.kind == UserAction::Kind::type) ++o.types;
      const auto end = d.shown.begin() + std::min<std::ptrdiff_t>(3, static_cast<std::ptrdiff_t>(d.shown.size()));
      if (std::find(d.shown.begin(), end, d.label) != end) ++o.top3_hits;
    }
    o.interactions = static_cast<int>(s.log.size());
    const std::vector<Edge>& reference = slot->truth ? slot->truth->edges : s.graph.edges;
    o.initial_edge_errors = edge_edit_distance(s.initial_graph.edges, reference);
    o.refined_edge_errors = edge_edit_distance(s.graph.edges, reference);
    r.add(o);
  }
  r.finish();
  json j = r;
  j.erase("trial");
  j.erase("seconds");
  return j;
}

std::vector<unsigned char> AnnotationService::frame_color(const std::string& frame_id) const {
  return encode_color_png(load(frame_id).color);
}

json AnnotationService::frame_overlay(const std::string& frame_id, const std::optional<std::string>& session_id) const {
  if (session_id) {
    auto s = slot(*session_id);
    std::lock_guard lock(s->mutex);
    const Session& ss = s->session;
    if (ss.frame.frame_id != frame_id) throw Error(Errc::not_found, "session is on another frame");
    json nodes = json::array();
    for (const SGNode& n : ss.graph.nodes) {
      json nj = node_state(ss, n);
      nodes.push_back({{"id", n.id},
                       {"display_label", nj["display_label"]},
                       {"confirmed", nj["confirmed"]},
                       {"projection", nj["projection"]}});
    }
    return {{"frame_id", frame_id},
            {"width", ss.frame.width()},
            {"height", ss.frame.height()},
            {"boundaries", encode_rle(boundary_pixels(ss.segments, ss.frame.width(), ss.frame.height()),
                                      ss.frame.width(), ss.frame.height())},
            {"nodes", nodes}};
  }
  const RgbdFrame f = load(frame_id);
  const auto segments = oversegment(f, compute_normals(f), config_.session.segmentation);
  return {{"frame_id", frame_id},
          {"width", f.width()},
          {"height", f.height()},
          {"boundaries", encode_rle(boundary_pixels(segments, f.width(), f.height()), f.width(), f.height())},
          {"nodes", json::array()}};
}

void AnnotationService::serve(const std::string& host, int port, std::atomic<int>* bound) {
  auto server = std::make_shared<httplib::Server>();
  {
    std::lock_guard lock(mutex_);
    server_ = server;
  }
  httplib::Server& svr = *server;
  auto reply = [](httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  };
  auto guarded = [reply](auto&& fn) {
    return [fn, reply](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        reply(res, error_body(e), http_status(e.code()));
      } catch (const json::exception& e) {
        reply(res, {{"error", "BadMetadata"}, {"message", e.what()}}, 400);
      } catch (const std::exception& e) {
        reply(res, {{"error", "Internal"}, {"message", e.what()}}, 500);
      }
    };
  };
  auto parse_body = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  };

  svr.Post("/sessions", guarded([&, reply, parse_body](const httplib::Request& req, httplib::Response& res) {
             reply(res, create_session(parse_body(req)), 201);
           }));
  svr.Get(R"(/sessions/([^/]+))", guarded([&, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, session(req.matches[1]));
          }));
  svr.Post(R"(/sessions/([^/]+)/actions)",
           guarded([&, reply, parse_body](const httplib::Request& req, httplib::Response& res) {
             reply(res, act(req.matches[1], parse_body(req)));
           }));
  svr.Post("/retrain", guarded([&, reply, parse_body](const httplib::Request& req, httplib::Response& res) {
             reply(res, retrain(parse_body(req)));
           }));
  svr.Get("/metrics", guarded([&, reply](const httplib::Request&, httplib::Response& res) { reply(res, metrics()); }));
  svr.Get(R"(/frames/([^/]+)/color)", guarded([&](const httplib::Request& req, httplib::Response& res) {
            const auto png = frame_color(req.matches[1]);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
          }));
  svr.Get(R"(/frames/([^/]+)/overlay)", guarded([&, reply](const httplib::Request& req, httplib::Response& res) {
            std::optional<std::string> sid;
            if (req.has_param("session")) sid = req.get_param_value("session");
            reply(res, frame_overlay(req.matches[1], sid));
          }));

  if (port == 0) {
    const int p = svr.bind_to_any_port(host);
    if (p < 0) throw Error(Errc::io_failure, "cannot bind " + host);
    if (bound) *bound = p;
    svr.listen_after_bind();
  } else {
    if (!svr.bind_to_port(host, port)) throw Error(Errc::io_failure, "cannot bind " + host + ":" + std::to_string(port));
    if (bound) *bound = port;
    svr.listen_after_bind();
  }
}

void AnnotationService::stop() {
  std::shared_ptr<void> server;
  {
    std::lock_guard lock(mutex_);
    server = server_;
  }
  if (server) static_cast<httplib::Server*>(server.get())->stop();
}

}  // namespace rgbdann
