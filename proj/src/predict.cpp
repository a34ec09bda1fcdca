#include "rgbdann/predict.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rgbdann/error.hpp"
#include "rgbdann/refine.hpp"

namespace rgbdann {
namespace {

void sort_entries(std::vector<Suggestion>& entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const Suggestion& a, const Suggestion& b) {
    return a.score > b.score || (a.score == b.score && a.label < b.label);
  });
}

std::vector<std::string> non_floor_categories(const LabelPriors& priors) {
  std::vector<std::string> out;
  for (const std::string& c : priors.categories())
    if (!priors.floor_category(c)) out.push_back(c);
  return out;
}

}  // namespace

std::vector<std::string> SuggestionList::labels() const {
  std::vector<std::string> out;
  for (const Suggestion& s : entries) out.push_back(s.label);
  return out;
}

bool SuggestionList::contains(const std::string& label) const { return rank_of(label) < entries.size(); }

std::size_t SuggestionList::rank_of(const std::string& label) const {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].label == label) return i;
  return entries.size();
}

double log_floor(double p) { return std::log(std::max(p, kLogFloor)); }

double energy(const Labeling& labels, const StructureGraph& g, const LabelPriors& priors) {
  auto label_of = [&](int id) -> const std::string& {
    auto it = labels.find(id);
    if (it == labels.end()) throw Error(Errc::incomplete_assignment, "node " + std::to_string(id) + " unlabeled");
    return it->second;
  };
  double e = 0.0;
  for (const SGNode& n : g.nodes) label_of(n.id);
  for (int id : g.ground()) e -= log_floor(priors.p_g(label_of(id), g.node(id)));
  for (int id : g.floating()) e -= log_floor(priors.p_g(label_of(id), g.node(id)));
  for (const Edge& edge : g.edges) {
    const std::string& lj = label_of(edge.child);
    const std::string parent = edge.parent == kFloorId ? std::string(kFloorLabel) : label_of(edge.parent);
    e -= log_floor(priors.p_g(lj, g.node(edge.child))) + log_floor(priors.p_s(parent, lj));
  }
  return e;
}

SuggestionList suggest_ground(const SGNode& v, bool supporting, const LabelPriors& priors, int m) {
  SuggestionList out{v.id, {}};
  std::vector<std::string> candidates;
  for (const std::string& c : priors.categories())
    if (priors.floor_category(c)) candidates.push_back(c);
  const bool fallback = candidates.empty();
  if (fallback) candidates = priors.categories();
  const std::vector<std::string> others = non_floor_categories(priors);
  for (const std::string& l : candidates) {
    double f = log_floor(priors.p_g(l, v));
    if (supporting && !fallback)
      for (const std::string& k : others) f += log_floor(priors.p_s(l, k));
    out.entries.push_back({l, f});
  }
  sort_entries(out.entries);
  if (out.entries.size() > static_cast<std::size_t>(m)) out.entries.resize(m);
  return out;
}

SuggestionList suggest_supported(const SGNode& v, std::span<const std::string> parent_labels,
                                 const LabelPriors& priors, int m) {
  SuggestionList out{v.id, {}};
  const std::vector<std::string> candidates = non_floor_categories(priors);
  std::set<std::string> used;
  for (const std::string& lp : parent_labels) {
    if (out.entries.size() >= static_cast<std::size_t>(m)) break;
    std::vector<Suggestion> scored;
    for (const std::string& l : candidates) {
      if (used.contains(l)) continue;
      const double ps = priors.p_s(lp, l);
      if (ps != 0.0) scored.push_back({l, log_floor(priors.p_g(l, v)) + log_floor(ps)});
    }
    if (scored.empty())
      for (const std::string& l : candidates)
        if (!used.contains(l)) scored.push_back({l, log_floor(priors.p_g(l, v))});
    if (scored.empty()) continue;
    sort_entries(scored);
    used.insert(scored.front().label);
    out.entries.push_back(scored.front());
  }
  sort_entries(out.entries);
  return out;
}

SuggestionList merge_floating(const SuggestionList& s1, const SuggestionList& s2, int m) {
  SuggestionList out{s1.node, {}};
  std::set<std::string> used;
  auto take = [&](const SuggestionList& s, std::size_t limit, std::size_t& next) {
    std::size_t taken = 0;
    while (taken < limit && next < s.entries.size()) {
      const Suggestion& e = s.entries[next++];
      if (used.insert(e.label).second) {
        out.entries.push_back(e);
        ++taken;
      }
    }
  };
  const std::size_t half = static_cast<std::size_t>(m / 2);
  std::size_t i1 = 0, i2 = 0;
  take(s1, half, i1);
  take(s2, static_cast<std::size_t>(m) - out.entries.size(), i2);
  // Pad from whatever is left, S_1 first.
  take(s1, static_cast<std::size_t>(m) - out.entries.size(), i1);
  take(s2, static_cast<std::size_t>(m) - out.entries.size(), i2);
  sort_entries(out.entries);
  return out;
}

SuggestionList suggest_floating(const SGNode& v, const StructureGraph& g,
                                const std::map<int, SuggestionList>& lists, const LabelPriors& priors, int m,
                                const ParseConfig& cfg) {
  const bool supporting = !g.children_of(v.id).empty();
  SGNode grounded = v;
  grounded.cuboid = extrude_to_floor(v.cuboid, g.frame);
  grounded.rect = g.frame.footprint(grounded.cuboid);

  int parent = -1;
  double best_area = -1.0;
  for (const SGNode& u : g.nodes) {
    if (u.id == v.id || !g.parent_of(u.id) || !likely_supports(u, v, g, cfg)) continue;
    const double area = rect_intersection_area(u.rect, v.rect);
    if (area > best_area) {
      parent = u.id;
      best_area = area;
    }
  }
  SuggestionList s2 = suggest_ground(grounded, supporting, priors, m);
  s2.node = v.id;
  if (parent < 0) return s2;

  SGNode lifted = v;
  lifted.cuboid = snap_bottom(v.cuboid, g.node(parent).cuboid.top_level());
  lifted.rect = g.frame.footprint(lifted.cuboid);
  std::vector<std::string> parent_labels;
  if (auto it = lists.find(parent); it != lists.end()) parent_labels = it->second.labels();
  else if (g.node(parent).label) parent_labels = {*g.node(parent).label};
  SuggestionList s1 = suggest_supported(lifted, parent_labels, priors, m);
  s1.node = v.id;
  return merge_floating(s1, s2, m);
}

std::map<int, SuggestionList> suggest_all(const StructureGraph& g, const LabelPriors& priors, int m,
                                          const ParseConfig& cfg, const Labeling& confirmed) {
  std::map<int, SuggestionList> lists;
  for (int id : g.level_order()) {
    const SGNode& v = g.node(id);
    if (auto it = confirmed.find(id); it != confirmed.end()) {
      lists[id] = SuggestionList{id, {{it->second, 0.0}}};
      continue;
    }
    const std::optional<int> parent = g.parent_of(id);
    if (!parent) {
      lists[id] = suggest_floating(v, g, lists, priors, m, cfg);
    } else if (*parent == kFloorId) {
      lists[id] = suggest_ground(v, !g.children_of(id).empty(), priors, m);
    } else {
      lists[id] = suggest_supported(v, lists.at(*parent).labels(), priors, m);
    }
  }
  return lists;
}

double TablePriors::p_g(const std::string& category, const SGNode& node) const {
  if (std::find(category_list.begin(), category_list.end(), category) == category_list.end())
    throw Error(Errc::unknown_category, category);
  auto it = geometric.find(node.id);
  if (it == geometric.end()) return 1.0 / static_cast<double>(category_list.size());
  double total = 0.0;
  for (const std::string& c : category_list)
    if (auto w = it->second.find(c); w != it->second.end()) total += w->second;
  auto w = it->second.find(category);
  return total > 0.0 && w != it->second.end() ? w->second / total : 0.0;
}

double TablePriors::p_s(const std::string& parent, const std::string& child) const {
  auto it = support.find({parent, child});
  return it == support.end() ? 0.0 : it->second;
}

}  // namespace rgbdann
