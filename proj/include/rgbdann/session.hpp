#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgbdann/documents.hpp"
#include "rgbdann/frame.hpp"
#include "rgbdann/layout.hpp"
#include "rgbdann/predict.hpp"
#include "rgbdann/priors.hpp"
#include "rgbdann/refine.hpp"
#include "rgbdann/segmentation.hpp"
#include "rgbdann/structure_graph.hpp"

namespace rgbdann {

enum class Phase { segmenting, labeling, done };
std::string_view to_string(Phase p);

struct UserAction {
  enum class Kind { confirm, reorder, type, approve_all, undo, scribble, seed_floor, seed_wall };
  Kind kind = Kind::confirm;
  int node = 0;
  std::string label;              // reorder / type
  std::vector<Scribble> strokes;  // scribble
  int segment = -1;               // seed_floor / seed_wall

  static UserAction confirm(int node) { return make(Kind::confirm, node); }
  static UserAction reorder(int node, std::string label) { return make(Kind::reorder, node, std::move(label)); }
  static UserAction type(int node, std::string label) { return make(Kind::type, node, std::move(label)); }
  static UserAction approve_all() { return make(Kind::approve_all); }
  static UserAction undo() { return make(Kind::undo); }
  static UserAction scribble(std::vector<Scribble> strokes) {
    UserAction a = make(Kind::scribble);
    a.strokes = std::move(strokes);
    return a;
  }
  static UserAction seed_floor(int segment) { return seeded(Kind::seed_floor, segment); }
  static UserAction seed_wall(int segment) { return seeded(Kind::seed_wall, segment); }

  bool operator==(const UserAction&) const = default;

 private:
  static UserAction make(Kind k, int node = 0, std::string label = {}) {
    UserAction a;
    a.kind = k;
    a.node = node;
    a.label = std::move(label);
    return a;
  }
  static UserAction seeded(Kind k, int segment) {
    UserAction a = make(k);
    a.segment = segment;
    return a;
  }
};
std::string_view to_string(UserAction::Kind k);
UserAction::Kind action_kind_from_string(std::string_view s);

struct SessionConfig {
  int suggestions = kDefaultSuggestions;
  bool allow_new_labels = false;
  ParseConfig parse;
  OversegmentOptions segmentation;
  bool operator==(const SessionConfig& o) const;
};

using ObjectMasks = std::map<int, std::vector<int>>;  // node id -> segment indices

/// How a node got its label, with the list shown at that moment.
struct Decision {
  UserAction::Kind kind = UserAction::Kind::confirm;  // confirm, reorder or type
  std::vector<std::string> shown;
  std::string label;
};

struct Session {
  std::string id;
  RgbdFrame frame;
  std::vector<Segment> segments;
  SessionConfig config;
  std::shared_ptr<const PriorModel> model;  // snapshot taken at creation

  Phase phase = Phase::segmenting;
  std::optional<ObjectMasks> initial_objects;  // as given at creation
  ObjectMasks objects;
  std::optional<RoomLayout> layout;
  bool manual_layout = false;
  std::map<int, std::vector<Vec3>> node_points;
  StructureGraph graph;
  StructureGraph initial_graph;  // first graph built from the parse
  std::map<int, SuggestionList> suggestions;
  Labeling confirmed;
  std::vector<std::string> extra_labels;  // typed labels outside the model's categories
  std::vector<RefinementEvent> undo_stack;
  std::vector<RefinementEvent> events;  // everything that happened, in order
  std::vector<UserAction> log;          // accepted actions only
  std::map<int, Decision> decisions;
  std::optional<AnnotationRecord> result;
  std::vector<std::string> warnings;

  bool is_confirmed(int node) const { return confirmed.contains(node); }
};

/// Segments the frame and, when object masks are known, parses and predicts.
/// Without masks, or when no floor is found, the session stays in the segmenting phase.
Session create_session(std::string id, RgbdFrame frame, std::shared_ptr<const PriorModel> model,
                       const SessionConfig& config = {}, std::optional<ObjectMasks> objects = std::nullopt);

/// Hands the session its object masks (all at once, before any scribble). Empty masks are dropped.
void provide_objects(Session& s, ObjectMasks objects);

struct ActionResult {
  std::vector<RefinementEvent> events;
  std::vector<int> changed_nodes;
  Phase phase = Phase::segmenting;
};

ActionResult apply_action(Session& s, const UserAction& action);

/// The record the session would produce for its current graph and segments.
AnnotationRecord make_record(const Session& s);

nlohmann::json action_log(const Session& s);
/// Re-runs a persisted log from scratch against the same frame and model.
Session replay(const nlohmann::json& log, RgbdFrame frame, std::shared_ptr<const PriorModel> model);

void to_json(nlohmann::json& j, const UserAction& a);
void from_json(const nlohmann::json& j, UserAction& a);
void to_json(nlohmann::json& j, const SessionConfig& c);
void from_json(const nlohmann::json& j, SessionConfig& c);

}  // namespace rgbdann
