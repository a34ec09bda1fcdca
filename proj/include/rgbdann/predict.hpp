#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rgbdann/priors.hpp"
#include "rgbdann/structure_graph.hpp"

namespace rgbdann {

inline constexpr int kDefaultSuggestions = 6;

struct Suggestion {
  std::string label;
  double score = 0.0;
  bool operator==(const Suggestion&) const = default;
};

/// Distinct labels, scores non-increasing, at most m entries.
struct SuggestionList {
  int node = 0;
  std::vector<Suggestion> entries;

  std::vector<std::string> labels() const;
  bool contains(const std::string& label) const;
  std::size_t rank_of(const std::string& label) const;  // entries.size() when absent
  bool operator==(const SuggestionList&) const = default;
};

using Labeling = std::map<int, std::string>;

double log_floor(double p);

/// Literal labeling energy; floor edges contribute log P_g(l_i) + log P_s(floor, l_i).
double energy(const Labeling& labels, const StructureGraph& g, const LabelPriors& priors);

/// Ranking by f_g over O_s (all of O by log P_g when O_s is empty).
SuggestionList suggest_ground(const SGNode& v, bool supporting, const LabelPriors& priors, int m);
/// One entry per parent label in order: argmax of f_s over O - O_s.
SuggestionList suggest_supported(const SGNode& v, std::span<const std::string> parent_labels,
                                 const LabelPriors& priors, int m);
/// Merge of the supported-hypothesis list (top floor(m/2)) and the occluded-ground list.
SuggestionList merge_floating(const SuggestionList& s1, const SuggestionList& s2, int m);
SuggestionList suggest_floating(const SGNode& v, const StructureGraph& g,
                                const std::map<int, SuggestionList>& lists, const LabelPriors& priors, int m,
                                const ParseConfig& cfg);

/// Level-order traversal; confirmed nodes get their label as a single-entry list.
std::map<int, SuggestionList> suggest_all(const StructureGraph& g, const LabelPriors& priors, int m,
                                          const ParseConfig& cfg, const Labeling& confirmed = {});

/// Hand-specified priors (tests and harnesses). P_g is looked up per node id and
/// normalized over the categories.
class TablePriors final : public LabelPriors {
 public:
  std::vector<std::string> category_list;
  std::map<int, std::map<std::string, double>> geometric;  // node id -> category -> weight
  std::map<std::pair<std::string, std::string>, double> support;
  std::set<std::string> o_c, o_p, o_s;

  const std::vector<std::string>& categories() const override { return category_list; }
  double p_g(const std::string& category, const SGNode& node) const override;
  double p_s(const std::string& parent, const std::string& child) const override;
  bool wall_contact_category(const std::string& c) const override { return o_c.contains(c); }
  bool wall_align_category(const std::string& c) const override { return o_p.contains(c); }
  bool floor_category(const std::string& c) const override { return o_s.contains(c); }
};

}  // namespace rgbdann
