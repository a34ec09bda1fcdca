#include "rgbdann/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <sstream>

#include "rgbdann/error.hpp"

namespace rgbdann {

using nlohmann::json;

namespace {

std::vector<Edge> restricted(std::span<const Edge> edges, const std::set<int>& nodes) {
  std::vector<Edge> out;
  for (const Edge& e : edges)
    if ((e.parent == kFloorId || nodes.contains(e.parent)) && nodes.contains(e.child)) out.push_back(e);
  return out;
}

SceneOutcome annotate(const LabeledFrame& lf, std::shared_ptr<const PriorModel> model, const SessionConfig& config) {
  Session s = create_session(lf.frame.frame_id, lf.frame, std::move(model), config);
  std::vector<int> ids;
  for (const ObjectRecord& o : lf.truth.objects) ids.push_back(o.id);
  provide_objects(s, majority_masks(lf.object_ids, ids, s.segments));
  return simulate_user(s, lf.truth, lf.truth_graph);
}

TrialRun run_protocol(const std::vector<StructureGraph>& bootstrap, const TrialOptions& options,
                      const std::function<LabeledFrame(int trial, int k)>& scene_at, const std::vector<int>& sizes,
                      const std::function<void(const TrialReport&)>& progress) {
  const SizeCatalog catalog = catalog_from(options.generator.categories);
  PriorModel model = train_priors(bootstrap, catalog, category_names(options.generator.categories), options.priors);
  auto snapshot = std::make_shared<const PriorModel>(std::move(model));
  SessionConfig config = options.session;
  config.suggestions = options.suggestions;

  TrialRun run;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    TrialReport report;
    report.trial = static_cast<int>(t) + 1;
    std::vector<StructureGraph> finished;
    for (int k = 0; k < sizes[t]; ++k) {
      const LabeledFrame lf = scene_at(static_cast<int>(t), k);
      SceneOutcome outcome = annotate(lf, snapshot, config);
      report.add(outcome);
      finished.push_back(truth_graph_of(outcome.record));
    }
    snapshot = std::make_shared<const PriorModel>(retrain_incremental(*snapshot, finished));
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.finish();
    if (progress) progress(report);
    run.reports.push_back(report);
  }
  run.final_model = snapshot;
  return run;
}

}  // namespace

LabeledFrame labeled_from(const SyntheticScene& scene) {
  return {scene.frame, scene.truth, scene.truth_graph, scene.object_ids};
}

StructureGraph truth_graph_of(const AnnotationRecord& record) {
  StructureGraph g;
  g.frame = record.layout.frame();
  const ParseConfig cfg;
  for (const ObjectRecord& o : record.objects) {
    SGNode n;
    n.id = o.id;
    n.cuboid = o.cuboid;
    n.label = o.label;
    refresh_node(n, g.frame, record.layout, cfg);
    g.nodes.push_back(std::move(n));
  }
  std::sort(g.nodes.begin(), g.nodes.end(), [](const SGNode& a, const SGNode& b) { return a.id < b.id; });
  g.edges = record.edges;
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::vector<LabeledFrame> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::missing_file, dir.string());
  std::vector<std::filesystem::path> entries;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_directory() && std::filesystem::exists(e.path() / "annotation.json")) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  std::vector<LabeledFrame> out;
  for (const auto& p : entries) {
    LabeledFrame lf;
    lf.frame = load_frame(p);
    lf.truth = load_annotation(p / "annotation.json");
    lf.truth_graph = truth_graph_of(lf.truth);
    lf.object_ids = Image<int>(lf.frame.width(), lf.frame.height(), 0);
    for (const ObjectRecord& o : lf.truth.objects) {
      if (o.mask.width != lf.frame.width() || o.mask.height != lf.frame.height())
        throw Error(Errc::dimension_mismatch, p.string() + ": mask of object " + std::to_string(o.id));
      for (int px : decode_rle(o.mask)) lf.object_ids[px] = o.id;
    }
    out.push_back(std::move(lf));
  }
  return out;
}

SceneOutcome simulate_user(Session& s, const AnnotationRecord& truth, const StructureGraph& truth_graph) {
  SceneOutcome o;
  o.frame_id = s.frame.frame_id;
  std::map<int, std::string> label;
  for (const ObjectRecord& r : truth.objects) label[r.id] = r.label;
  o.objects = static_cast<int>(s.graph.nodes.size());

  auto send = [&](const UserAction& a) {
    apply_action(s, a);
    o.actions.push_back(a);
    ++o.interactions;
  };
  auto hit = [&](int node) {
    const SuggestionList& l = s.suggestions.at(node);
    if (l.contains(label.at(node)) && l.rank_of(label.at(node)) < 3) ++o.top3_hits;
  };

  while (s.phase == Phase::labeling) {
    std::vector<int> open;
    for (int id : s.graph.level_order())
      if (!s.is_confirmed(id)) open.push_back(id);
    const bool all_right = std::all_of(open.begin(), open.end(), [&](int id) {
      const SuggestionList& l = s.suggestions.at(id);
      return !l.entries.empty() && l.entries.front().label == label.at(id);
    });
    if (all_right) {
      for (int id : open) hit(id);
      o.confirms += static_cast<int>(open.size());
      send(UserAction::approve_all());
      break;
    }
    const int node = open.front();
    const std::string& want = label.at(node);
    const SuggestionList& list = s.suggestions.at(node);
    hit(node);
    const std::size_t rank = list.rank_of(want);
    if (rank >= list.entries.size()) {
      ++o.types;
      send(UserAction::type(node, want));
    } else if (rank == 0) {
      ++o.confirms;
      send(UserAction::confirm(node));
    } else {
      ++o.reorders;
      send(UserAction::reorder(node, want));
    }
  }
  if (s.phase != Phase::done) throw Error(Errc::invalid_action, "session did not reach the labeling phase");

  std::set<int> nodes;
  for (const SGNode& n : s.graph.nodes) nodes.insert(n.id);
  const std::vector<Edge> gt = restricted(truth_graph.edges, nodes);
  o.initial_edge_errors = edge_edit_distance(s.initial_graph.edges, gt);
  o.refined_edge_errors = edge_edit_distance(s.graph.edges, gt);
  o.record = *s.result;
  return o;
}

void TrialReport::add(const SceneOutcome& o) {
  ++scenes;
  objects += o.objects;
  confirms += o.confirms;
  reorders += o.reorders;
  types += o.types;
  interactions += o.interactions;
  top3_hit += o.top3_hits;
  initial_edge_error += static_cast<double>(o.initial_edge_errors);
  refined_edge_error += static_cast<double>(o.refined_edge_errors);
}

void TrialReport::finish() {
  const double n = objects > 0 ? objects : 1.0;
  top3_hit /= n;
  initial_edge_error /= n;
  refined_edge_error /= n;
}

TrialOptions default_trial_options() {
  TrialOptions o;
  o.generator.noise_k = 0.001;
  o.generator.occlusion_rate = 0.2;
  o.bootstrap_set = {"bed", "night stand", "dresser", "lamp", "pillow"};
  return o;
}

TrialRun run_trials(const TrialOptions& options, const std::function<void(const TrialReport&)>& progress) {
  const std::uint64_t base = options.seed * 1000003ULL;
  GeneratorParams boot = options.generator;
  if (!options.bootstrap_set.empty()) boot.allowed = options.bootstrap_set;
  std::vector<StructureGraph> bootstrap;
  for (int i = 0; i < options.bootstrap; ++i) bootstrap.push_back(generate_scene(boot, base + i).truth_graph);
  auto scene_at = [&](int t, int k) {
    return labeled_from(generate_scene(options.generator, base + 100000 + static_cast<std::uint64_t>(t) * 1000 + k));
  };
  return run_protocol(bootstrap, options, scene_at, std::vector<int>(options.trials, options.per_trial), progress);
}

TrialRun run_trials(const std::vector<LabeledFrame>& dataset, const TrialOptions& options,
                    const std::function<void(const TrialReport&)>& progress) {
  const std::size_t boot = std::min<std::size_t>(dataset.size(), std::max(options.bootstrap, 0));
  std::vector<StructureGraph> bootstrap;
  for (std::size_t i = 0; i < boot; ++i) bootstrap.push_back(dataset[i].truth_graph);
  const std::size_t rest = dataset.size() - boot;
  std::vector<int> sizes;
  std::vector<std::size_t> offsets;
  const std::size_t trials = std::max(options.trials, 1);
  for (std::size_t t = 0, at = boot; t < trials; ++t) {
    const std::size_t n = rest / trials + (t < rest % trials ? 1 : 0);
    offsets.push_back(at);
    sizes.push_back(static_cast<int>(n));
    at += n;
  }
  auto scene_at = [&](int t, int k) { return dataset[offsets[t] + k]; };
  return run_protocol(bootstrap, options, scene_at, sizes, progress);
}

void to_json(json& j, const TrialReport& r) {
  j = {{"trial", r.trial},
       {"scenes", r.scenes},
       {"objects", r.objects},
       {"confirm", r.confirms},
       {"reorder", r.reorders},
       {"type", r.types},
       {"interactions", r.interactions},
       {"top3_hit", r.top3_hit},
       {"initial_edge_error", r.initial_edge_error},
       {"refined_edge_error", r.refined_edge_error},
       {"seconds", r.seconds}};
}

json reports_json(const std::vector<TrialReport>& reports) { return json(reports); }

std::string reports_csv(const std::vector<TrialReport>& reports) {
  std::ostringstream out;
  out << "trial,scenes,objects,confirm,reorder,type,interactions,top3_hit,initial_edge_error,refined_edge_error,"
         "seconds\n";
  out << std::setprecision(6);
  for (const TrialReport& r : reports)
    out << r.trial << ',' << r.scenes << ',' << r.objects << ',' << r.confirms << ',' << r.reorders << ',' << r.types
        << ',' << r.interactions << ',' << r.top3_hit << ',' << r.initial_edge_error << ',' << r.refined_edge_error
        << ',' << r.seconds << '\n';
  return out.str();
}

double mean_top3(const std::vector<TrialReport>& reports, int first, int last) {
  double sum = 0.0;
  int n = 0;
  for (const TrialReport& r : reports)
    if (r.trial >= first && r.trial <= last) {
      sum += r.top3_hit;
      ++n;
    }
  return n ? sum / n : 0.0;
}

}  // namespace rgbdann
