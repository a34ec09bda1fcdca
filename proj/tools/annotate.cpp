#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "rgbdann/evaluation.hpp"
#include "rgbdann/scene_parse.hpp"
#include "rgbdann/service.hpp"
#include "rgbdann/simgen.hpp"

using namespace rgbdann;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

AnnotationService* running = nullptr;

void on_signal(int) {
  if (running) running->stop();
}

void write_scene(const SyntheticScene& scene, const fs::path& dir) {
  save_frame(scene.frame, dir);
  save_annotation(scene.truth, dir / "annotation.json");
}

int cmd_synth(const fs::path& out, std::uint64_t seed, int count, double noise, double occlusion, bool two_click) {
  fs::create_directories(out);
  if (two_click) {
    const SyntheticScene scene = render_scene(two_click_scene());
    write_scene(scene, out / scene.frame.frame_id);
    std::cout << scene.frame.frame_id << '\n';
    return 0;
  }
  GeneratorParams params;
  params.noise_k = noise;
  params.occlusion_rate = occlusion;
  for (int i = 0; i < count; ++i) {
    const SyntheticScene scene = generate_scene(params, seed + static_cast<std::uint64_t>(i));
    write_scene(scene, out / scene.frame.frame_id);
    std::cout << scene.frame.frame_id << ' ' << scene.truth.objects.size() << " objects\n";
  }
  return 0;
}

int cmd_bootstrap(const fs::path& out, const std::string& dataset, const std::string& catalog_path, int scenes,
                  std::uint64_t seed) {
  TrialOptions opts = default_trial_options();
  const SizeCatalog catalog = catalog_path.empty() ? catalog_from(opts.generator.categories) : load_catalog(catalog_path);
  std::vector<StructureGraph> corpus;
  std::vector<std::string> categories = category_names(opts.generator.categories);
  if (!dataset.empty()) {
    for (const LabeledFrame& lf : load_dataset(dataset)) {
      corpus.push_back(lf.truth_graph);
      for (const SGNode& n : lf.truth_graph.nodes)
        if (std::find(categories.begin(), categories.end(), *n.label) == categories.end())
          categories.push_back(*n.label);
    }
  } else {
    GeneratorParams boot = opts.generator;
    boot.allowed = opts.bootstrap_set;
    const std::uint64_t base = seed * 1000003ULL;
    for (int i = 0; i < scenes; ++i) corpus.push_back(generate_scene(boot, base + i).truth_graph);
  }
  const PriorModel model = train_priors(corpus, catalog, categories, opts.priors);
  save_model(model, out);
  std::cout << "trained on " << corpus.size() << " graphs, hash " << content_hash(model) << '\n';
  return 0;
}

int cmd_serve(const fs::path& data, const fs::path& model_path, const std::string& results, const std::string& host,
              int port, bool allow_new) {
  ServiceConfig config;
  config.data_dir = data;
  config.results_dir = results;
  config.session.allow_new_labels = allow_new;
  AnnotationService service(config, std::make_shared<const PriorModel>(load_model(model_path)));
  running = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::atomic<int> bound{0};
  std::thread announce([&] {
    while (bound == 0) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    if (bound > 0) std::cout << "listening on " << host << ':' << bound << std::endl;
  });
  try {
    service.serve(host, port, &bound);
  } catch (...) {
    bound = -1;
    announce.join();
    throw;
  }
  if (bound == 0) bound = -1;
  announce.join();
  running = nullptr;
  return 0;
}

int cmd_eval(int trials, int per_trial, int bootstrap, int suggestions, std::uint64_t seed, const std::string& dataset,
             const std::string& csv_path, const std::string& json_path) {
  TrialOptions opts = default_trial_options();
  opts.trials = trials;
  opts.per_trial = per_trial;
  opts.bootstrap = bootstrap;
  opts.suggestions = suggestions;
  opts.seed = seed;
  auto progress = [](const TrialReport& r) {
    std::cerr << "trial " << r.trial << ": top3 " << r.top3_hit << ", edges " << r.initial_edge_error << " -> "
              << r.refined_edge_error << " (" << r.seconds << " s)\n";
  };
  const TrialRun run = dataset.empty() ? run_trials(opts, progress) : run_trials(load_dataset(dataset), opts, progress);
  const std::string csv = reports_csv(run.reports);
  std::cout << csv;
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << csv;
  }
  if (!json_path.empty()) write_json(reports_json(run.reports), json_path);
  if (trials >= 5) {
    const double early = mean_top3(run.reports, 1, 2), late = mean_top3(run.reports, 5, trials);
    std::cout << "top3 trials 1-2 " << early << ", trials 5-" << trials << ' ' << late << ", gain "
              << (late - early) * 100.0 << " pp\n";
  }
  return 0;
}

int cmd_parse(const fs::path& frame_dir, const fs::path& out) {
  RgbdFrame frame = load_frame(frame_dir);
  const OversegmentOptions seg_opts;
  const std::vector<Segment> segments = oversegment(frame, compute_normals(frame), seg_opts);
  std::vector<std::vector<int>> masks;
  std::vector<int> ids;
  if (fs::exists(frame_dir / "annotation.json")) {
    const AnnotationRecord truth = load_annotation(frame_dir / "annotation.json");
    Image<int> object_ids(frame.width(), frame.height(), 0);
    std::vector<int> truth_ids;
    for (const ObjectRecord& o : truth.objects) {
      truth_ids.push_back(o.id);
      for (int px : decode_rle(o.mask)) object_ids[px] = o.id;
    }
    for (auto& [id, members] : majority_masks(object_ids, truth_ids, segments)) {
      if (members.empty()) continue;
      masks.push_back(members);
      ids.push_back(id);
    }
  }
  const ParseConfig cfg;
  const SceneParse p = parse_scene(frame, segments, masks, cfg);
  std::vector<SGNode> nodes;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    SGNode n;
    n.id = ids[i];
    n.cuboid = p.cuboids[i];
    n.segments = masks[i];
    nodes.push_back(std::move(n));
  }
  const StructureGraph g = build_graph(p.layout, std::move(nodes), cfg);
  save_graph(g, out);
  for (const std::string& w : p.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << segments.size() << " segments, " << p.layout.walls.size() << " walls, " << g.nodes.size()
            << " objects, " << g.edges.size() << " support edges\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive RGBD scene annotation"};
  app.require_subcommand(1);

  std::string data, model, results, host = "127.0.0.1";
  int port = 8080;
  bool allow_new = false;
  auto* serve = app.add_subcommand("serve", "Run the HTTP annotation service");
  serve->add_option("--data", data, "Directory with one subdirectory per frame")->required();
  serve->add_option("--model", model, "Prior model file")->required();
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--host", host, "Address to bind");
  serve->add_option("--results", results, "Where finished annotations go (default DATA/annotations)");
  serve->add_flag("--allow-new-labels", allow_new, "Accept typed labels outside the model's categories");

  int trials = 7, per_trial = 18, bootstrap = 10, suggestions = kDefaultSuggestions;
  std::uint64_t seed = 1;
  bool synthetic = false;
  std::string dataset, csv_path, json_path;
  auto* eval = app.add_subcommand("eval", "Run the incremental-learning protocol with a scripted user");
  eval->add_option("--trials", trials)->check(CLI::PositiveNumber);
  eval->add_option("--per-trial", per_trial)->check(CLI::NonNegativeNumber);
  eval->add_option("--bootstrap", bootstrap)->check(CLI::NonNegativeNumber);
  eval->add_option("--suggestions", suggestions)->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed);
  auto* synth_flag = eval->add_flag("--synthetic", synthetic, "Generated scenes (default)");
  eval->add_option("--dataset", dataset, "Directory of annotated frames")->excludes(synth_flag);
  eval->add_option("--csv", csv_path, "Also write the per-trial CSV here");
  eval->add_option("--json", json_path, "Also write the per-trial JSON here");

  std::string frame_dir, dump;
  auto* parse = app.add_subcommand("parse", "Parse one frame and write its structure graph");
  parse->add_option("FRAME", frame_dir, "Frame directory")->required();
  parse->add_option("--dump-structure", dump, "Output graph file")->required();

  std::string out;
  int count = 1;
  double noise = 0.0, occlusion = 0.0;
  bool two_click = false;
  auto* synth = app.add_subcommand("synth", "Write synthetic frames with their ground truth");
  synth->add_option("--out", out)->required();
  synth->add_option("--seed", seed);
  synth->add_option("--count", count)->check(CLI::PositiveNumber);
  synth->add_option("--noise", noise)->check(CLI::NonNegativeNumber);
  synth->add_option("--occlusion", occlusion)->check(CLI::Range(0.0, 1.0));
  synth->add_flag("--two-click", two_click, "The bed, pillows and hidden night stand scene");

  std::string catalog;
  int scenes = 10;
  auto* boot = app.add_subcommand("bootstrap", "Train an initial prior model");
  boot->add_option("--out", out)->required();
  boot->add_option("--dataset", dataset, "Annotated frames to train on instead of generated ones");
  boot->add_option("--catalog", catalog, "Size catalog (default: generator sizes)");
  boot->add_option("--scenes", scenes)->check(CLI::PositiveNumber);
  boot->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve) return cmd_serve(data, model, results, host, port, allow_new);
    if (*eval) return cmd_eval(trials, per_trial, bootstrap, suggestions, seed, dataset, csv_path, json_path);
    if (*parse) return cmd_parse(frame_dir, dump);
    if (*synth) return cmd_synth(out, seed, count, noise, occlusion, two_click);
    if (*boot) return cmd_bootstrap(out, dataset, catalog, scenes, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
