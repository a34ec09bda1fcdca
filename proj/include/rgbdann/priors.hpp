#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rgbdann/structure_graph.hpp"

namespace rgbdann {

inline constexpr double kLogFloor = 1e-6;
inline constexpr const char* kFloorLabel = "floor";

/// Read-only view of the label model used by prediction and refinement.
class LabelPriors {
 public:
  virtual ~LabelPriors() = default;
  virtual const std::vector<std::string>& categories() const = 0;
  /// Normalized over categories() for every node.
  virtual double p_g(const std::string& category, const SGNode& node) const = 0;
  /// parent may be kFloorLabel.
  virtual double p_s(const std::string& parent, const std::string& child) const = 0;
  virtual bool wall_contact_category(const std::string& c) const = 0;  // O_c
  virtual bool wall_align_category(const std::string& c) const = 0;    // O_p
  virtual bool floor_category(const std::string& c) const = 0;         // O_s
};

struct NominalSize {
  double area;    // m^2
  double height;  // m
};
using SizeCatalog = std::map<std::string, std::vector<NominalSize>>;

SizeCatalog load_catalog(const std::filesystem::path& path);

struct GeomSample {
  std::string category;
  double base_area;
  double height;
};

struct EnrichOptions {
  double area_sigma = 0.01;  // m^2
  double height_sigma = 0.10;
  double min_value = 1e-4;
};

/// n_extra jittered copies of the nominal sizes per category (cycling through them).
std::vector<GeomSample> enrich_samples(const SizeCatalog& catalog, std::span<const std::string> categories,
                                       int n_extra, std::uint64_t seed, const EnrichOptions& opts = {});

/// Class-conditional Gaussian over (log area, log height).
struct Gaussian2 {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
  double log_density(const Eigen::Vector2d& x) const;
};

inline constexpr double kCovarianceRidge = 1e-4;

struct GeometricModel {
  std::vector<std::string> categories;
  std::map<std::string, Gaussian2> classes;

  /// Posterior over categories under a uniform class prior; categories without a
  /// fitted class get 0.
  std::vector<double> posterior(double base_area, double height) const;
  double p_g(const std::string& category, double base_area, double height) const;
};

Eigen::Vector2d log_features(double base_area, double height);

/// Categories with no samples stay unfitted; a single sample is an error.
GeometricModel train_geometric(std::span<const GeomSample> samples, std::span<const std::string> categories);
Gaussian2 fit_gaussian(std::span<const Eigen::Vector2d> features);

struct PairCount {
  long edges = 0;
  long cooccurrences = 0;
  bool operator==(const PairCount&) const = default;
};
struct SpatialCount {
  long nodes = 0;
  long contact = 0;
  long align = 0;
  bool operator==(const SpatialCount&) const = default;
};

using SupportTable = std::map<std::pair<std::string, std::string>, PairCount>;

struct SupportModel {
  SupportTable counts;
  std::set<std::string> floor_supported;  // O_s
  double p_s(const std::string& parent, const std::string& child) const;
};

struct SpatialModel {
  std::map<std::string, SpatialCount> counts;
  std::set<std::string> contact;  // O_c
  std::set<std::string> align;    // O_p
};

SupportTable count_support(std::span<const StructureGraph> corpus, std::span<const std::string> categories);
SupportModel train_support(std::span<const StructureGraph> corpus, std::span<const std::string> categories);
std::map<std::string, SpatialCount> count_spatial(std::span<const StructureGraph> corpus,
                                                  std::span<const std::string> categories);
SpatialModel train_spatial(std::span<const StructureGraph> corpus, std::span<const std::string> categories);
std::set<std::string> floor_set(const SupportTable& counts, std::span<const std::string> categories);

struct PriorConfig {
  int enrich_count = 20;
  std::uint64_t seed = 0;
  EnrichOptions enrich;
};

/// Trained snapshot. Raw counts and samples are kept so that retraining on more graphs
/// is exactly batch training on the union.
class PriorModel final : public LabelPriors {
 public:
  std::vector<std::string> category_list;
  PriorConfig config;
  std::map<std::string, std::vector<Eigen::Vector2d>> samples;  // log features, sorted
  SupportTable support_counts;
  std::map<std::string, SpatialCount> spatial_counts;
  std::size_t graphs = 0;

  GeometricModel geometric;
  std::set<std::string> o_c, o_p, o_s;

  const std::vector<std::string>& categories() const override { return category_list; }
  double p_g(const std::string& category, const SGNode& node) const override;
  double p_s(const std::string& parent, const std::string& child) const override;
  bool wall_contact_category(const std::string& c) const override { return o_c.contains(c); }
  bool wall_align_category(const std::string& c) const override { return o_p.contains(c); }
  bool floor_category(const std::string& c) const override { return o_s.contains(c); }

  /// Recomputes the Gaussians and constraint sets from the stored counts.
  void refit();
  bool operator==(const PriorModel& o) const;
};

PriorModel train_priors(std::span<const StructureGraph> corpus, const SizeCatalog& catalog,
                        std::vector<std::string> categories, const PriorConfig& config = {});
/// Copy of `model` whose category list also holds `extra` (new categories start unfitted).
PriorModel with_categories(const PriorModel& model, std::span<const std::string> extra);
PriorModel retrain_incremental(const PriorModel& model, std::span<const StructureGraph> new_graphs);

/// Samples contributed by the labeled nodes of a graph.
std::vector<GeomSample> graph_samples(const StructureGraph& g);

}  // namespace rgbdann
