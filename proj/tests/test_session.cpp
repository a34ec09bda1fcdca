#include <doctest.h>

#include <algorithm>

#include "pipeline.hpp"
#include "rgbdann/evaluation.hpp"
#include "rgbdann/session.hpp"
#include "support.hpp"

using namespace rgbdann;

namespace {

std::shared_ptr<const PriorModel> model() {
  static const auto m = testing::bootstrap_model();
  return m;
}

ObjectMasks masks_of(const SyntheticScene& scene, const SessionConfig& cfg = {}) {
  return simulated_masks(scene, oversegment(scene.frame, compute_normals(scene.frame), cfg.segmentation));
}

Session bed_session(SessionConfig cfg = {}) {
  const SyntheticScene scene = render_scene(two_click_scene());
  return create_session("bed", scene.frame, model(), cfg, masks_of(scene, cfg));
}

void check_closure(const Session& s) {
  for (const SGNode& n : s.graph.nodes) {
    REQUIRE(n.label.has_value());
    if (!s.model->floor_category(*n.label)) continue;
    const auto parent = s.graph.parent_of(n.id);
    REQUIRE(parent.has_value());
    if (*parent == kFloorId || cuboid_contains(s.graph.node(*parent).cuboid, n.cuboid)) continue;
    CHECK(s.model->p_s(*s.graph.node(*parent).label, *n.label) >= kStrongSupport);
  }
}

}  // namespace

TEST_SUITE("session") {
  TEST_CASE("phases run segmenting, labeling, done") {
    const SyntheticScene scene = render_scene(two_click_scene());
    Session s = create_session("p", scene.frame, model());
    CHECK(s.phase == Phase::segmenting);
    CHECK(testing::error_code([&] { apply_action(s, UserAction::confirm(1)); }) == Errc::invalid_action);
    CHECK(testing::error_code([&] { apply_action(s, UserAction::approve_all()); }) == Errc::invalid_action);
    provide_objects(s, masks_of(scene));
    CHECK(s.phase == Phase::labeling);
    CHECK(testing::error_code([&] { provide_objects(s, {}); }) == Errc::invalid_action);
    for (const auto& [id, list] : s.suggestions) {
      CHECK(list.entries.size() <= kDefaultSuggestions);
      CHECK_FALSE(list.entries.empty());
    }
    const ActionResult r = apply_action(s, UserAction::approve_all());
    CHECK(r.phase == Phase::done);
    CHECK(s.result.has_value());
    for (const SGNode& n : s.graph.nodes) CHECK(n.label.has_value());
    CHECK(testing::error_code([&] { apply_action(s, UserAction::undo()); }) == Errc::invalid_action);
  }

  TEST_CASE("action errors") {
    Session s = bed_session();
    CHECK(testing::error_code([&] { apply_action(s, UserAction::confirm(99)); }) == Errc::unknown_node);
    CHECK(testing::error_code([&] { apply_action(s, UserAction::reorder(1, "spaceship")); }) ==
          Errc::label_not_in_suggestions);
    CHECK(testing::error_code([&] { apply_action(s, UserAction::type(1, "spaceship")); }) == Errc::unknown_category);
    CHECK(testing::error_code([&] { apply_action(s, UserAction::type(1, "floor")); }) == Errc::unknown_category);
    CHECK(testing::error_code([&] { apply_action(s, UserAction::undo()); }) == Errc::no_op);
    CHECK(s.log.empty());
    apply_action(s, UserAction::confirm(1));
    CHECK(testing::error_code([&] { apply_action(s, UserAction::confirm(1)); }) == Errc::invalid_action);
    CHECK(s.log.size() == 1);
  }

  TEST_CASE("new labels are accepted when allowed") {
    SessionConfig cfg;
    cfg.allow_new_labels = true;
    Session s = bed_session(cfg);
    apply_action(s, UserAction::type(3, "cushion"));
    CHECK(s.extra_labels == std::vector<std::string>{"cushion"});
    CHECK(s.graph.node(3).label == "cushion");
    apply_action(s, UserAction::approve_all());
    CHECK(s.result->objects[2].label == "cushion");
  }

  TEST_CASE("confirmed nodes are never re-suggested") {
    Session s = bed_session();
    const std::string top = s.suggestions.at(3).entries.front().label;
    const std::string other = s.suggestions.at(3).entries.back().label;
    apply_action(s, UserAction::reorder(3, other));
    CHECK(s.suggestions.at(3).labels() == std::vector<std::string>{other});
    apply_action(s, UserAction::confirm(1));
    CHECK(s.suggestions.at(3).labels() == std::vector<std::string>{other});
    CHECK(s.decisions.at(3).kind == UserAction::Kind::reorder);
    CHECK(s.decisions.at(3).shown.front() == top);
  }

  TEST_CASE("undo walks refinement events back") {
    Session s = bed_session();
    const StructureGraph start = s.graph;
    const ActionResult r = apply_action(s, UserAction::confirm(1));
    REQUIRE_FALSE(r.events.empty());
    CHECK_FALSE(r.changed_nodes.empty());
    CHECK(s.graph.parent_of(2) == kFloorId);
    for (std::size_t i = 0; i < r.events.size(); ++i) apply_action(s, UserAction::undo());
    CHECK(s.graph.edges == start.edges);
    for (const SGNode& n : start.nodes) CHECK(s.graph.node(n.id).cuboid == n.cuboid);
    CHECK(testing::error_code([&] { apply_action(s, UserAction::undo()); }) == Errc::no_op);
    // The label stays confirmed.
    CHECK(s.is_confirmed(1));
  }

  TEST_CASE("persisted logs replay to the same record") {
    const TrialOptions opts = default_trial_options();
    for (std::uint64_t seed : {81u, 82u}) {
      const SyntheticScene scene = generate_scene(opts.generator, seed);
      Session s = create_session("r", scene.frame, model(), {}, masks_of(scene));
      simulate_user(s, scene.truth, scene.truth_graph);
      const nlohmann::json log = action_log(s);
      const Session again = replay(nlohmann::json::parse(log.dump()), scene.frame, model());
      REQUIRE(again.result.has_value());
      CHECK(*again.result == *s.result);
      CHECK(content_hash(*again.result) == content_hash(*s.result));
    }
  }

  TEST_CASE("replay refuses a different model") {
    Session s = bed_session();
    apply_action(s, UserAction::approve_all());
    const auto other = std::make_shared<const PriorModel>(retrain_incremental(*model(), std::vector<StructureGraph>{}));
    const auto changed = std::make_shared<const PriorModel>(
        retrain_incremental(*model(), std::vector<StructureGraph>{generate_scene(GeneratorParams{}, 3).truth_graph}));
    CHECK(replay(action_log(s), s.frame, other).result == s.result);
    CHECK(testing::error_code([&] { replay(action_log(s), s.frame, changed); }) == Errc::invariant_violation);
  }

  TEST_CASE("approve_all leaves floor categories grounded") {
    const TrialOptions opts = default_trial_options();
    for (std::uint64_t seed = 90; seed < 96; ++seed) {
      const SyntheticScene scene = generate_scene(opts.generator, seed);
      Session s = create_session("c", scene.frame, model(), {}, masks_of(scene));
      apply_action(s, UserAction::approve_all());
      check_closure(s);
    }
  }

  TEST_CASE("sessions never touch the model") {
    const std::size_t before = content_hash(*model());
    Session s = bed_session();
    apply_action(s, UserAction::confirm(1));
    apply_action(s, UserAction::approve_all());
    CHECK(content_hash(*model()) == before);
    CHECK(s.model == model());
  }

  TEST_CASE("a frame without objects can be approved at once") {
    GeneratorParams p;
    p.min_objects = p.max_objects = 0;
    const SyntheticScene scene = generate_scene(p, 4);
    Session s = create_session("e", scene.frame, model(), {}, ObjectMasks{});
    CHECK(s.phase == Phase::labeling);
    CHECK(s.graph.nodes.empty());
    apply_action(s, UserAction::approve_all());
    CHECK(s.phase == Phase::done);
    CHECK(s.result->objects.empty());
  }

  TEST_CASE("no floor sends the session back to segmenting") {
    RgbdFrame f;
    f.frame_id = "wall";
    f.color = Image<Rgb>(40, 30, Rgb{120, 120, 120});
    f.depth = Image<float>(40, 30, 2.0f);
    f.intrinsics = {50, 50, 19.5, 14.5};
    Session s = create_session("w", f, model(), {}, ObjectMasks{});
    CHECK(s.phase == Phase::segmenting);
    CHECK_FALSE(s.warnings.empty());
    CHECK(testing::error_code([&] { apply_action(s, UserAction::seed_floor(-1)); }) == Errc::invalid_action);
    CHECK(testing::error_code([&] { apply_action(s, UserAction::seed_wall(0)); }) == Errc::invalid_action);
  }

  TEST_CASE("a scribble adds an object node") {
    const SyntheticScene scene = render_scene(two_click_scene());
    ObjectMasks masks = masks_of(scene);
    masks.erase(4);
    Session s = create_session("s", scene.frame, model(), {}, masks);
    REQUIRE(s.graph.nodes.size() == 3);
    std::vector<std::array<int, 2>> line;
    for (int y = 0; y < scene.frame.height() && line.size() < 2; ++y)
      for (int x = 0; x < scene.frame.width() && line.size() < 2; ++x)
        if (scene.object_ids(x, y) == 4 && scene.object_ids(x + 2, y) == 4) line = {{x, y}, {x + 2, y}};
    REQUIRE(line.size() == 2);
    apply_action(s, UserAction::scribble({Scribble{line, Scribble::Kind::foreground}}));
    CHECK(s.graph.nodes.size() == 4);
    CHECK(s.graph.find(4) != nullptr);
    CHECK(s.graph.parent_of(4) == 1);
    for (int m : s.objects.at(4)) CHECK(s.segments[m].owner == 4);
  }

  TEST_CASE("actions and configs round-trip through JSON") {
    const std::vector<UserAction> actions{UserAction::confirm(3), UserAction::reorder(2, "lamp"),
                                          UserAction::type(1, "rug"), UserAction::approve_all(), UserAction::undo(),
                                          UserAction::scribble({Scribble{{{1, 2}, {3, 4}}, Scribble::Kind::background}}),
                                          UserAction::seed_floor(7), UserAction::seed_wall(9)};
    for (const UserAction& a : actions) CHECK(nlohmann::json(a).get<UserAction>() == a);
    CHECK(testing::error_code([] { nlohmann::json{{"kind", "dance"}}.get<UserAction>(); }) == Errc::invalid_action);
    CHECK(testing::error_code([] { nlohmann::json{{"node", 1}}.get<UserAction>(); }) == Errc::invalid_action);
    SessionConfig c;
    c.suggestions = 4;
    c.allow_new_labels = true;
    c.parse.dist_tol = 0.2;
    CHECK(nlohmann::json(c).get<SessionConfig>() == c);
  }
}
