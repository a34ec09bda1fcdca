#include "rgbdann/priors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "rgbdann/error.hpp"

namespace rgbdann {
namespace {

void check_category(std::span<const std::string> categories, const std::string& c) {
  if (c != kFloorLabel && std::find(categories.begin(), categories.end(), c) == categories.end())
    throw Error(Errc::unknown_label, "label '" + c + "' is not a known category");
}

bool lex_less(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
}

}  // namespace

SizeCatalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_metadata, path.string() + ": " + e.what());
  }
  SizeCatalog out;
  try {
    for (const auto& [name, entries] : doc.at("categories").items())
      for (const auto& e : entries) out[name].push_back({e.at("area").get<double>(), e.at("height").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_metadata, std::string("catalog: ") + e.what());
  }
  return out;
}

std::vector<GeomSample> enrich_samples(const SizeCatalog& catalog, std::span<const std::string> categories,
                                       int n_extra, std::uint64_t seed, const EnrichOptions& opts) {
  std::vector<GeomSample> out;
  if (n_extra <= 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (const std::string& c : categories) {
    auto it = catalog.find(c);
    if (it == catalog.end() || it->second.empty()) throw Error(Errc::missing_spec, c);
    for (int k = 0; k < n_extra; ++k) {
      const NominalSize& nominal = it->second[k % it->second.size()];
      const double area = nominal.area + opts.area_sigma * unit(rng);
      const double height = nominal.height + opts.height_sigma * unit(rng);
      out.push_back({c, std::max(area, opts.min_value), std::max(height, opts.min_value)});
    }
  }
  return out;
}

double Gaussian2::log_density(const Eigen::Vector2d& x) const {
  const Eigen::Vector2d d = x - mean;
  const double det = cov.determinant();
  return -0.5 * d.dot(cov.inverse() * d) - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi);
}

Eigen::Vector2d log_features(double base_area, double height) {
  return {std::log(std::max(base_area, kLogFloor)), std::log(std::max(height, kLogFloor))};
}

Gaussian2 fit_gaussian(std::span<const Eigen::Vector2d> features) {
  Gaussian2 g;
  const double n = static_cast<double>(features.size());
  for (const auto& f : features) g.mean += f;
  g.mean /= n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& f : features) cov += (f - g.mean) * (f - g.mean).transpose();
  g.cov = cov / n + kCovarianceRidge * Eigen::Matrix2d::Identity();
  return g;
}

std::vector<double> GeometricModel::posterior(double base_area, double height) const {
  const Eigen::Vector2d x = log_features(base_area, height);
  std::vector<double> logp(categories.size(), -INFINITY);
  double top = -INFINITY;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    auto it = classes.find(categories[i]);
    if (it == classes.end()) continue;
    logp[i] = it->second.log_density(x);
    top = std::max(top, logp[i]);
  }
  std::vector<double> out(categories.size(), 0.0);
  if (!std::isfinite(top)) return out;
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::isfinite(logp[i]) ? std::exp(logp[i] - top) : 0.0;
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double GeometricModel::p_g(const std::string& category, double base_area, double height) const {
  auto it = std::find(categories.begin(), categories.end(), category);
  if (it == categories.end()) throw Error(Errc::unknown_category, category);
  return posterior(base_area, height)[static_cast<std::size_t>(it - categories.begin())];
}

GeometricModel train_geometric(std::span<const GeomSample> samples, std::span<const std::string> categories) {
  std::map<std::string, std::vector<Eigen::Vector2d>> by_class;
  for (const GeomSample& s : samples) {
    if (std::find(categories.begin(), categories.end(), s.category) == categories.end())
      throw Error(Errc::unknown_category, s.category);
    by_class[s.category].push_back(log_features(s.base_area, s.height));
  }
  GeometricModel m;
  m.categories.assign(categories.begin(), categories.end());
  for (auto& [c, feats] : by_class) {
    if (feats.size() < 2) throw Error(Errc::insufficient_samples, c);
    std::sort(feats.begin(), feats.end(), lex_less);
    m.classes[c] = fit_gaussian(feats);
  }
  return m;
}

double SupportModel::p_s(const std::string& parent, const std::string& child) const {
  auto it = counts.find({parent, child});
  if (it == counts.end() || it->second.cooccurrences == 0) return 0.0;
  return static_cast<double>(it->second.edges) / static_cast<double>(it->second.cooccurrences);
}

SupportTable count_support(std::span<const StructureGraph> corpus, std::span<const std::string> categories) {
  SupportTable table;
  for (const StructureGraph& g : corpus) {
    std::map<int, std::string> label;
    for (const SGNode& n : g.nodes) {
      if (!n.label) throw Error(Errc::unknown_label, "unlabeled node " + std::to_string(n.id));
      check_category(categories, *n.label);
      label[n.id] = *n.label;
    }
    label[kFloorId] = kFloorLabel;
    for (const SGNode& a : g.nodes) {
      ++table[{kFloorLabel, *a.label}].cooccurrences;
      for (const SGNode& b : g.nodes)
        if (a.id != b.id) ++table[{*a.label, *b.label}].cooccurrences;
    }
    for (const Edge& e : g.edges) ++table[{label.at(e.parent), label.at(e.child)}].edges;
  }
  return table;
}

std::set<std::string> floor_set(const SupportTable& counts, std::span<const std::string> categories) {
  SupportModel m{counts, {}};
  std::set<std::string> out;
  for (const std::string& c : categories)
    if (m.p_s(kFloorLabel, c) >= kFloorSupportRatio) out.insert(c);
  return out;
}

SupportModel train_support(std::span<const StructureGraph> corpus, std::span<const std::string> categories) {
  SupportModel m;
  m.counts = count_support(corpus, categories);
  m.floor_supported = floor_set(m.counts, categories);
  return m;
}

std::map<std::string, SpatialCount> count_spatial(std::span<const StructureGraph> corpus,
                                                  std::span<const std::string> categories) {
  std::map<std::string, SpatialCount> counts;
  for (const StructureGraph& g : corpus)
    for (const SGNode& n : g.nodes) {
      if (!n.label) throw Error(Errc::unknown_label, "unlabeled node " + std::to_string(n.id));
      check_category(categories, *n.label);
      SpatialCount& c = counts[*n.label];
      ++c.nodes;
      c.contact += n.wall_contact;
      c.align += n.wall_align;
    }
  return counts;
}

namespace {
void spatial_sets(const std::map<std::string, SpatialCount>& counts, std::set<std::string>& contact,
                  std::set<std::string>& align) {
  contact.clear();
  align.clear();
  for (const auto& [c, n] : counts) {
    if (n.nodes == 0) continue;
    if (static_cast<double>(n.contact) / static_cast<double>(n.nodes) > kConstraintRatio) contact.insert(c);
    if (static_cast<double>(n.align) / static_cast<double>(n.nodes) > kConstraintRatio) align.insert(c);
  }
}
}  // namespace

SpatialModel train_spatial(std::span<const StructureGraph> corpus, std::span<const std::string> categories) {
  SpatialModel m;
  m.counts = count_spatial(corpus, categories);
  spatial_sets(m.counts, m.contact, m.align);
  return m;
}

std::vector<GeomSample> graph_samples(const StructureGraph& g) {
  std::vector<GeomSample> out;
  for (const SGNode& n : g.nodes)
    if (n.label) out.push_back({*n.label, n.cuboid.base_area(), n.cuboid.height()});
  return out;
}

double PriorModel::p_g(const std::string& category, const SGNode& node) const {
  return geometric.p_g(category, node.cuboid.base_area(), node.cuboid.height());
}

double PriorModel::p_s(const std::string& parent, const std::string& child) const {
  auto it = support_counts.find({parent, child});
  if (it == support_counts.end() || it->second.cooccurrences == 0) return 0.0;
  return static_cast<double>(it->second.edges) / static_cast<double>(it->second.cooccurrences);
}

void PriorModel::refit() {
  geometric = GeometricModel{};
  geometric.categories = category_list;
  for (auto& [c, feats] : samples) {
    if (feats.size() < 2) continue;  // too few to fit; posterior stays 0
    std::sort(feats.begin(), feats.end(), lex_less);
    geometric.classes[c] = fit_gaussian(feats);
  }
  o_s = floor_set(support_counts, category_list);
  spatial_sets(spatial_counts, o_c, o_p);
}

bool PriorModel::operator==(const PriorModel& o) const {
  return category_list == o.category_list && samples == o.samples && support_counts == o.support_counts &&
         spatial_counts == o.spatial_counts && graphs == o.graphs && o_c == o.o_c && o_p == o.o_p && o_s == o.o_s;
}

namespace {
void accumulate(PriorModel& m, std::span<const StructureGraph> graphs) {
  for (const auto& [key, count] : count_support(graphs, m.category_list)) {
    PairCount& c = m.support_counts[key];
    c.edges += count.edges;
    c.cooccurrences += count.cooccurrences;
  }
  for (const auto& [key, count] : count_spatial(graphs, m.category_list)) {
    SpatialCount& c = m.spatial_counts[key];
    c.nodes += count.nodes;
    c.contact += count.contact;
    c.align += count.align;
  }
  for (const StructureGraph& g : graphs)
    for (const GeomSample& s : graph_samples(g)) m.samples[s.category].push_back(log_features(s.base_area, s.height));
  m.graphs += graphs.size();
}
}  // namespace

PriorModel train_priors(std::span<const StructureGraph> corpus, const SizeCatalog& catalog,
                        std::vector<std::string> categories, const PriorConfig& config) {
  PriorModel m;
  m.category_list = std::move(categories);
  m.config = config;
  for (const GeomSample& s : enrich_samples(catalog, m.category_list, config.enrich_count, config.seed, config.enrich))
    m.samples[s.category].push_back(log_features(s.base_area, s.height));
  accumulate(m, corpus);
  m.refit();
  return m;
}

PriorModel with_categories(const PriorModel& model, std::span<const std::string> extra) {
  PriorModel m = model;
  for (const std::string& c : extra)
    if (c != kFloorLabel && std::find(m.category_list.begin(), m.category_list.end(), c) == m.category_list.end())
      m.category_list.push_back(c);
  m.refit();
  return m;
}

PriorModel retrain_incremental(const PriorModel& model, std::span<const StructureGraph> new_graphs) {
  PriorModel m = model;
  accumulate(m, new_graphs);
  m.refit();
  return m;
}

}  // namespace rgbdann
