#include "rgbdann/session.hpp"

#include <algorithm>

#include "rgbdann/error.hpp"
#include "rgbdann/scene_parse.hpp"

namespace rgbdann {

using nlohmann::json;

namespace {

constexpr std::string_view kActionNames[] = {"confirm", "reorder",  "type",      "approve_all",
                                             "undo",    "scribble", "seed_floor", "seed_wall"};

RefineContext context_of(const Session& s) {
  return RefineContext{*s.layout, *s.model, s.config.parse, s.frame.viewpoint, &s.node_points};
}

std::vector<char> layout_eligibility(const Session& s) {
  std::vector<char> eligible(s.segments.size(), 1);
  for (const auto& [id, members] : s.objects)
    for (int m : members) eligible[m] = 0;
  return eligible;
}

void retag(Session& s) {
  for (Segment& seg : s.segments) {
    seg.tag = SegmentTag::unlabeled;
    seg.owner = -1;
    seg.label.reset();
  }
  if (s.layout) tag_layout(s.segments, *s.layout);
  for (const auto& [id, members] : s.objects)
    for (int m : members) {
      s.segments[m].tag = SegmentTag::object;
      s.segments[m].owner = id;
    }
}

void predict(Session& s) {
  s.suggestions = suggest_all(s.graph, *s.model, s.config.suggestions, s.config.parse, s.confirmed);
  for (SGNode& n : s.graph.nodes) {
    auto it = s.suggestions.find(n.id);
    n.suggestions = it == s.suggestions.end() ? std::vector<std::string>{} : it->second.labels();
  }
}

SGNode fit_node(Session& s, int id) {
  std::vector<Vec3> points, normals;
  gather_points(s.segments, s.objects.at(id), points, normals);
  SGNode n;
  n.id = id;
  n.segments = s.objects.at(id);
  n.cuboid = fit_object_cuboid(points, normals, s.layout->floor, s.config.parse, &s.warnings);
  s.node_points[id] = std::move(points);
  return n;
}

/// Layout (unless seeded by hand), cuboids, graph and suggestions from the current masks.
void parse(Session& s) {
  if (!s.manual_layout) {
    std::vector<std::vector<int>> masks;
    for (const auto& [id, members] : s.objects) masks.push_back(members);
    try {
      SceneParse p = parse_scene(s.frame, s.segments, masks, s.config.parse);
      s.layout = std::move(p.layout);
      s.warnings.insert(s.warnings.end(), p.warnings.begin(), p.warnings.end());
    } catch (const Error& e) {
      if (e.code() != Errc::no_floor) throw;
      s.layout.reset();
      s.phase = Phase::segmenting;
      s.warnings.push_back("no floor found; seed the floor by hand");
      retag(s);
      return;
    }
  }
  retag(s);
  std::vector<SGNode> nodes;
  s.node_points.clear();
  for (const auto& [id, members] : s.objects) nodes.push_back(fit_node(s, id));
  s.graph = build_graph(*s.layout, std::move(nodes), s.config.parse);
  s.initial_graph = s.graph;
  s.undo_stack.clear();
  s.phase = Phase::labeling;
  predict(s);
}

/// Rebuild after the layout or the node set changed, keeping the current node geometry.
void regraph(Session& s) {
  std::vector<SGNode> nodes = s.graph.nodes;
  s.graph = build_graph(*s.layout, std::move(nodes), s.config.parse);
  predict(s);
}

bool known_label(const Session& s, const std::string& label) {
  const auto& cats = s.model->categories();
  return std::find(cats.begin(), cats.end(), label) != cats.end() ||
         std::find(s.extra_labels.begin(), s.extra_labels.end(), label) != s.extra_labels.end();
}

void require_phase(const Session& s, std::initializer_list<Phase> allowed, const UserAction& a) {
  if (std::find(allowed.begin(), allowed.end(), s.phase) == allowed.end())
    throw Error(Errc::invalid_action,
                std::string(to_string(a.kind)) + " is not allowed while " + std::string(to_string(s.phase)));
}

const SuggestionList& list_of(const Session& s, int node) {
  if (!s.graph.find(node)) throw Error(Errc::unknown_node, "node " + std::to_string(node));
  if (s.is_confirmed(node)) throw Error(Errc::invalid_action, "node " + std::to_string(node) + " is already confirmed");
  return s.suggestions.at(node);
}

std::vector<RefinementEvent> assign(Session& s, int node, const std::string& label) {
  s.confirmed[node] = label;
  s.graph.node(node).label = label;
  const RefineContext ctx = context_of(s);
  std::vector<RefinementEvent> out;
  RefinementEvent local = local_refine(s.graph, node, label, ctx);
  if (local.changed()) out.push_back(std::move(local));
  for (RefinementEvent& e : global_refine(s.graph, node, label, ctx))
    if (e.changed()) out.push_back(std::move(e));
  return out;
}

std::vector<int> diff_nodes(const StructureGraph& before, const StructureGraph& after) {
  std::vector<int> out;
  for (const SGNode& n : after.nodes) {
    const SGNode* old = before.find(n.id);
    if (!old || !(*old == n) || before.parent_of(n.id) != after.parent_of(n.id)) out.push_back(n.id);
  }
  return out;
}

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::segmenting: return "segmenting";
    case Phase::labeling: return "labeling";
    case Phase::done: return "done";
  }
  return "?";
}

std::string_view to_string(UserAction::Kind k) { return kActionNames[static_cast<int>(k)]; }

UserAction::Kind action_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kActionNames); ++i)
    if (kActionNames[i] == s) return static_cast<UserAction::Kind>(i);
  throw Error(Errc::invalid_action, "unknown action kind '" + std::string(s) + "'");
}

bool SessionConfig::operator==(const SessionConfig& o) const { return json(*this) == json(o); }

Session create_session(std::string id, RgbdFrame frame, std::shared_ptr<const PriorModel> model,
                       const SessionConfig& config, std::optional<ObjectMasks> objects) {
  if (!model) throw Error(Errc::invariant_violation, "session needs a model snapshot");
  Session s;
  s.id = std::move(id);
  s.frame = std::move(frame);
  s.model = std::move(model);
  s.config = config;
  s.segments = oversegment(s.frame, compute_normals(s.frame), config.segmentation);
  if (objects) provide_objects(s, std::move(*objects));
  return s;
}

void provide_objects(Session& s, ObjectMasks objects) {
  if (s.phase != Phase::segmenting || s.initial_objects || !s.objects.empty())
    throw Error(Errc::invalid_action, "objects are already known");
  std::vector<char> used(s.segments.size(), 0);
  for (const auto& [node, members] : objects) {
    if (node <= kFloorId) throw Error(Errc::invariant_violation, "object ids must be positive");
    for (int m : members) {
      if (m < 0 || static_cast<std::size_t>(m) >= s.segments.size())
        throw Error(Errc::invariant_violation, "object " + std::to_string(node) + " references unknown segment");
      if (used[m]++) throw Error(Errc::invariant_violation, "segment " + std::to_string(m) + " is in two objects");
    }
  }
  std::erase_if(objects, [](const auto& kv) { return kv.second.empty(); });
  s.initial_objects = objects;
  s.objects = std::move(objects);
  parse(s);
}

AnnotationRecord make_record(const Session& s) {
  AnnotationRecord r;
  r.frame_id = s.frame.frame_id;
  if (s.layout) r.layout = *s.layout;
  std::map<int, std::vector<int>> pixels;
  for (const Segment& seg : s.segments)
    if (seg.tag == SegmentTag::object && seg.owner > 0)
      pixels[seg.owner].insert(pixels[seg.owner].end(), seg.pixels.begin(), seg.pixels.end());
  for (const SGNode& n : s.graph.nodes) {
    ObjectRecord o;
    o.id = n.id;
    o.label = n.label.value_or("");
    std::vector<int>& px = pixels[n.id];
    std::sort(px.begin(), px.end());
    o.mask = encode_rle(px, s.frame.width(), s.frame.height());
    o.cuboid = n.cuboid;
    o.wall_contact = n.wall_contact;
    o.wall_align = n.wall_align;
    r.objects.push_back(std::move(o));
  }
  r.edges = s.graph.edges;
  return r;
}

ActionResult apply_action(Session& s, const UserAction& a) {
  if (s.phase == Phase::done) throw Error(Errc::invalid_action, "session is finished");
  const StructureGraph before = s.graph;
  ActionResult out;
  using K = UserAction::Kind;
  switch (a.kind) {
    case K::confirm:
    case K::reorder:
    case K::type: {
      require_phase(s, {Phase::labeling}, a);
      const SuggestionList& list = list_of(s, a.node);
      std::string label;
      if (a.kind == K::confirm) {
        if (list.entries.empty()) throw Error(Errc::invalid_action, "nothing to confirm");
        label = list.entries.front().label;
      } else if (a.kind == K::reorder) {
        if (!list.contains(a.label)) throw Error(Errc::label_not_in_suggestions, a.label);
        label = a.label;
      } else {
        if (a.label.empty() || a.label == kFloorLabel) throw Error(Errc::unknown_category, "'" + a.label + "'");
        if (!known_label(s, a.label)) {
          if (!s.config.allow_new_labels) throw Error(Errc::unknown_category, a.label);
          s.extra_labels.push_back(a.label);
        }
        label = a.label;
      }
      s.decisions[a.node] = {a.kind, list.labels(), label};
      out.events = assign(s, a.node, label);
      predict(s);
      break;
    }
    case K::approve_all: {
      require_phase(s, {Phase::labeling}, a);
      for (SGNode& n : s.graph.nodes) {
        if (s.is_confirmed(n.id)) continue;
        const SuggestionList& list = s.suggestions.at(n.id);
        if (list.entries.empty()) throw Error(Errc::incomplete_assignment, "node " + std::to_string(n.id));
        s.confirmed[n.id] = list.entries.front().label;
        n.label = list.entries.front().label;
        s.decisions[n.id] = {K::confirm, list.labels(), *n.label};
      }
      for (RefinementEvent& e : final_refine(s.graph, context_of(s)))
        if (e.changed()) out.events.push_back(std::move(e));
      s.segments = refine_segments(s.graph, std::move(s.segments), s.frame);
      predict(s);
      s.result = make_record(s);
      check_invariants(*s.result);
      s.phase = Phase::done;
      break;
    }
    case K::undo: {
      require_phase(s, {Phase::labeling}, a);
      out.events.push_back(undo(s.graph, s.undo_stack));
      predict(s);
      break;
    }
    case K::scribble: {
      require_phase(s, {Phase::segmenting, Phase::labeling}, a);
      ScribbleResult r = scribble_segment(s.frame, s.segments, a.strokes);
      s.warnings.insert(s.warnings.end(), r.warnings.begin(), r.warnings.end());
      std::vector<int> members;
      for (int seg : r.segments)
        if (s.segments[seg].tag != SegmentTag::object) members.push_back(seg);
      if (members.empty()) throw Error(Errc::invalid_action, "scribble selects no free segment");
      const int id = s.objects.empty() ? 1 : s.objects.rbegin()->first + 1;
      s.objects[id] = members;
      if (s.layout) {
        for (int m : members) {
          std::erase(s.layout->floor_segments, m);
          for (Wall& w : s.layout->walls) std::erase(w.segments, m);
        }
      }
      if (s.phase == Phase::labeling) {
        retag(s);
        s.graph.nodes.push_back(fit_node(s, id));
        regraph(s);
      } else {
        parse(s);
      }
      break;
    }
    case K::seed_floor: {
      require_phase(s, {Phase::segmenting, Phase::labeling}, a);
      const ParseConfig cfg = scaled_for(s.config.parse, s.frame.width(), s.frame.height());
      const std::vector<char> eligible = layout_eligibility(s);
      if (a.segment < 0 || static_cast<std::size_t>(a.segment) >= s.segments.size() || !eligible[a.segment])
        throw Error(Errc::invalid_action, "floor seed must be a free segment");
      const FloorFit floor = floor_from_seed(s.segments, a.segment, s.frame.gravity, cfg, eligible);
      RoomLayout layout;
      layout.floor = floor.plane;
      layout.floor_up = floor.plane.normal;
      layout.floor_segments = floor.segments;
      layout.walls = extract_walls(s.segments, floor, cfg, eligible, &s.warnings);
      s.layout = std::move(layout);
      s.manual_layout = true;
      if (s.initial_objects || !s.objects.empty()) {
        const Labeling keep = s.confirmed;
        parse(s);
        for (const auto& [node, label] : keep) s.graph.node(node).label = label;
        predict(s);
      } else {
        retag(s);
      }
      break;
    }
    case K::seed_wall: {
      require_phase(s, {Phase::segmenting, Phase::labeling}, a);
      if (!s.layout) throw Error(Errc::invalid_action, "seed the floor before the walls");
      const std::vector<char> eligible = layout_eligibility(s);
      if (a.segment < 0 || static_cast<std::size_t>(a.segment) >= s.segments.size() || !eligible[a.segment])
        throw Error(Errc::invalid_action, "wall seed must be a free segment");
      const FloorFit floor{s.layout->floor, s.layout->floor_segments};
      Wall wall = wall_from_seed(s.segments, a.segment, floor, s.config.parse, eligible);
      std::vector<Wall> walls{wall};
      for (const Wall& w : s.layout->walls) {
        const bool shared = std::any_of(w.segments.begin(), w.segments.end(), [&](int x) {
          return std::find(wall.segments.begin(), wall.segments.end(), x) != wall.segments.end();
        });
        if (!shared && walls.size() < 2) walls.push_back(w);
      }
      s.layout->walls = std::move(walls);
      s.manual_layout = true;
      retag(s);
      if (s.phase == Phase::labeling) regraph(s);
      break;
    }
  }
  for (const RefinementEvent& e : out.events) {
    if (e.kind != RefinementEvent::Kind::undo) s.undo_stack.push_back(e);
    s.events.push_back(e);
  }
  s.log.push_back(a);
  out.changed_nodes = diff_nodes(before, s.graph);
  out.phase = s.phase;
  return out;
}

void to_json(json& j, const UserAction& a) {
  j = {{"kind", to_string(a.kind)}};
  using K = UserAction::Kind;
  if (a.kind == K::confirm || a.kind == K::reorder || a.kind == K::type) j["node"] = a.node;
  if (a.kind == K::reorder || a.kind == K::type) j["label"] = a.label;
  if (a.kind == K::seed_floor || a.kind == K::seed_wall) j["segment"] = a.segment;
  if (a.kind == K::scribble) {
    json strokes = json::array();
    for (const Scribble& st : a.strokes)
      strokes.push_back({{"kind", st.kind == Scribble::Kind::foreground ? "foreground" : "background"},
                         {"polyline", st.polyline}});
    j["strokes"] = strokes;
  }
}

void from_json(const json& j, UserAction& a) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw Error(Errc::invalid_action, "action needs a kind");
  a = UserAction{};
  a.kind = action_kind_from_string(j["kind"].get<std::string>());
  try {
    a.node = j.value("node", 0);
    a.label = j.value("label", std::string{});
    a.segment = j.value("segment", -1);
    if (j.contains("strokes"))
      for (const json& st : j["strokes"]) {
        Scribble sc;
        const std::string kind = st.value("kind", std::string{"foreground"});
        if (kind != "foreground" && kind != "background") throw Error(Errc::invalid_action, "stroke kind " + kind);
        sc.kind = kind == "foreground" ? Scribble::Kind::foreground : Scribble::Kind::background;
        sc.polyline = st.at("polyline").get<std::vector<std::array<int, 2>>>();
        a.strokes.push_back(std::move(sc));
      }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_action, e.what());
  }
}

void to_json(json& j, const SessionConfig& c) {
  j = {{"suggestions", c.suggestions},
       {"allow_new_labels", c.allow_new_labels},
       {"angle_tol_deg", c.parse.angle_tol_deg},
       {"dist_tol", c.parse.dist_tol},
       {"min_wall_points", c.parse.min_wall_points},
       {"ransac_seed", c.parse.plane_ransac.seed},
       {"k_color", c.segmentation.k_color},
       {"k_normal", c.segmentation.k_normal},
       {"min_size", c.segmentation.min_size}};
}

void from_json(const json& j, SessionConfig& c) {
  c = SessionConfig{};
  c.suggestions = j.value("suggestions", kDefaultSuggestions);
  c.allow_new_labels = j.value("allow_new_labels", false);
  c.parse.angle_tol_deg = j.value("angle_tol_deg", c.parse.angle_tol_deg);
  c.parse.dist_tol = j.value("dist_tol", c.parse.dist_tol);
  c.parse.min_wall_points = j.value("min_wall_points", c.parse.min_wall_points);
  const std::uint64_t seed = j.value("ransac_seed", std::uint64_t{0});
  c.parse.plane_ransac.seed = c.parse.line_ransac.seed = c.segmentation.ransac.seed = seed;
  c.segmentation.k_color = j.value("k_color", c.segmentation.k_color);
  c.segmentation.k_normal = j.value("k_normal", c.segmentation.k_normal);
  c.segmentation.min_size = j.value("min_size", c.segmentation.min_size);
}

json action_log(const Session& s) {
  json objects = nullptr;
  if (s.initial_objects) {
    objects = json::object();
    for (const auto& [id, members] : *s.initial_objects) objects[std::to_string(id)] = members;
  }
  return make_document("action-log", {{"session", s.id},
                                      {"frame_id", s.frame.frame_id},
                                      {"model_hash", std::to_string(content_hash(*s.model))},
                                      {"config", s.config},
                                      {"objects", objects},
                                      {"actions", s.log}});
}

Session replay(const json& log, RgbdFrame frame, std::shared_ptr<const PriorModel> model) {
  const json body = open_document(log, "action-log");
  try {
    if (body.at("frame_id").get<std::string>() != frame.frame_id)
      throw Error(Errc::invariant_violation, "action log belongs to another frame");
    if (body.contains("model_hash") && body["model_hash"].get<std::string>() != std::to_string(content_hash(*model)))
      throw Error(Errc::invariant_violation, "action log was recorded against another model snapshot");
    std::optional<ObjectMasks> objects;
    if (!body.at("objects").is_null()) {
      objects.emplace();
      for (const auto& [key, members] : body["objects"].items())
        (*objects)[std::stoi(key)] = members.get<std::vector<int>>();
    }
    Session s = create_session(body.at("session").get<std::string>(), std::move(frame), std::move(model),
                               body.at("config").get<SessionConfig>());
    if (objects) provide_objects(s, std::move(*objects));
    for (const json& a : body.at("actions")) apply_action(s, a.get<UserAction>());
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::bad_metadata, std::string("action log: ") + e.what());
  }
}

}  // namespace rgbdann
