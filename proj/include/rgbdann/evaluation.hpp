#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgbdann/documents.hpp"
#include "rgbdann/session.hpp"
#include "rgbdann/simgen.hpp"

namespace rgbdann {

/// A frame with its ground-truth annotation and the object-id image the masks come from.
struct LabeledFrame {
  RgbdFrame frame;
  AnnotationRecord truth;
  StructureGraph truth_graph;
  Image<int> object_ids;
};

LabeledFrame labeled_from(const SyntheticScene& scene);
/// Structure graph of a ground-truth record (node rects and flags recomputed).
StructureGraph truth_graph_of(const AnnotationRecord& record);
/// Every subdirectory holding a frame plus annotation.json, in name order.
std::vector<LabeledFrame> load_dataset(const std::filesystem::path& dir);

/// Outcome of one scripted session.
struct SceneOutcome {
  std::string frame_id;
  int objects = 0;
  int confirms = 0, reorders = 0, types = 0;
  int interactions = 0;  // actions sent, approve-all included
  int top3_hits = 0;
  std::size_t initial_edge_errors = 0, refined_edge_errors = 0;
  std::vector<UserAction> actions;
  AnnotationRecord record;
};

/// Scripted user: walks unconfirmed nodes in level order; confirms when the true label is
/// ranked first, re-orders when it is listed, types it otherwise; approves all as soon as every
/// remaining rank-1 label is right. A label counts as a Top-3 hit when it is among the first
/// three entries shown at the moment the node is decided.
SceneOutcome simulate_user(Session& session, const AnnotationRecord& truth, const StructureGraph& truth_graph);

struct TrialReport {
  int trial = 0;
  int scenes = 0;
  int objects = 0;
  int confirms = 0, reorders = 0, types = 0;
  int interactions = 0;
  double top3_hit = 0.0;
  double initial_edge_error = 0.0;  // symmetric difference per object
  double refined_edge_error = 0.0;
  double seconds = 0.0;

  void add(const SceneOutcome& o);
  void finish();
};

struct TrialOptions {
  int trials = 7;
  int per_trial = 18;
  int bootstrap = 10;
  int suggestions = kDefaultSuggestions;
  std::uint64_t seed = 1;
  GeneratorParams generator;            // trial scenes
  std::set<std::string> bootstrap_set;  // categories allowed in bootstrap scenes (empty = all)
  PriorConfig priors;
  SessionConfig session;
};

/// Generator settings used by the evaluation: all default categories, depth noise and
/// clutter occlusion, bootstrap limited to the common bedroom furniture.
TrialOptions default_trial_options();

struct TrialRun {
  std::vector<TrialReport> reports;
  std::shared_ptr<const PriorModel> final_model;
};

/// Trial t is annotated with the model trained on the bootstrap plus trials < t.
TrialRun run_trials(const TrialOptions& options, const std::function<void(const TrialReport&)>& progress = {});
/// Same protocol over a fixed dataset: the first `bootstrap` frames train the model and the
/// rest are split into consecutive trials.
TrialRun run_trials(const std::vector<LabeledFrame>& dataset, const TrialOptions& options,
                    const std::function<void(const TrialReport&)>& progress = {});

std::string reports_csv(const std::vector<TrialReport>& reports);
nlohmann::json reports_json(const std::vector<TrialReport>& reports);
void to_json(nlohmann::json& j, const TrialReport& r);

/// Mean Top-3-Hit of trials [first, last] (1-based, inclusive).
double mean_top3(const std::vector<TrialReport>& reports, int first, int last);

}  // namespace rgbdann
