#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "rgbdann/evaluation.hpp"
#include "rgbdann/priors.hpp"
#include "rgbdann/simgen.hpp"
#include "support.hpp"

using namespace rgbdann;
using testing::box;
using testing::Gen;

namespace {

SGNode labeled(int id, const std::string& label, const Cuboid& c, bool contact = false, bool align = false) {
  SGNode n;
  n.id = id;
  n.label = label;
  n.cuboid = c;
  n.wall_contact = contact;
  n.wall_align = align;
  return n;
}

StructureGraph bedroom(double scale) {
  StructureGraph g;
  g.nodes = {labeled(1, "bed", box(1, 1, 0, 2.0 * scale, 1.5, 0.5), true, true),
             labeled(2, "pillow", box(1, 1, 0.5, 0.3, 0.5, 0.15 * scale)),
             labeled(3, "lamp", box(3, 3, 0.9, 0.3, 0.3, 0.5 * scale))};
  g.edges = {{kFloorId, 1}, {1, 2}};
  return g;
}

const std::vector<std::string> kCats{"bed", "pillow", "lamp"};

std::vector<StructureGraph> corpus(int n) {
  std::vector<StructureGraph> out;
  for (int i = 0; i < n; ++i) out.push_back(bedroom(1.0 + 0.05 * i));
  return out;
}

}  // namespace

TEST_SUITE("priors") {
  TEST_CASE("support frequencies match hand counts") {
    const auto c = corpus(4);
    const SupportModel m = train_support(c, kCats);
    // Every graph: floor-bed edge, bed-pillow edge, each pair co-occurs once per graph.
    CHECK(m.p_s(kFloorLabel, "bed") == 1.0);
    CHECK(m.p_s(kFloorLabel, "lamp") == 0.0);
    CHECK(m.p_s("bed", "pillow") == 1.0);
    CHECK(m.p_s("pillow", "bed") == 0.0);
    CHECK(m.p_s("lamp", "lamp") == 0.0);
    CHECK(m.counts.at({"bed", "pillow"}) == PairCount{4, 4});
    CHECK(m.floor_supported == std::set<std::string>{"bed"});
  }

  TEST_CASE("two instances of a category are counted per instance") {
    StructureGraph g = bedroom(1.0);
    g.nodes.push_back(labeled(4, "pillow", box(1.5, 1, 0.5, 0.3, 0.5, 0.15)));
    g.edges.push_back({1, 4});
    const SupportTable t = count_support(std::vector<StructureGraph>{g}, kCats);
    CHECK(t.at({"bed", "pillow"}) == PairCount{2, 2});
    CHECK(t.at({"pillow", "pillow"}) == PairCount{0, 2});
    CHECK(t.at({kFloorLabel, "pillow"}) == PairCount{0, 2});
  }

  TEST_CASE("spatial sets") {
    const SpatialModel m = train_spatial(corpus(3), kCats);
    CHECK(m.contact == std::set<std::string>{"bed"});
    CHECK(m.align == std::set<std::string>{"bed"});
    CHECK(m.counts.at("pillow").nodes == 3);
  }

  TEST_CASE("gaussian fit matches a direct computation") {
    const std::vector<Eigen::Vector2d> f{{0, 0}, {2, 0}, {0, 2}, {2, 2}};
    const Gaussian2 g = fit_gaussian(f);
    CHECK(g.mean.isApprox(Eigen::Vector2d(1, 1)));
    CHECK(g.cov(0, 0) == doctest::Approx(1.0 + kCovarianceRidge));
    CHECK(g.cov(0, 1) == doctest::Approx(0.0));
    const double expected = -0.5 * 0.0 - 0.5 * std::log((1 + kCovarianceRidge) * (1 + kCovarianceRidge)) -
                            std::log(2 * M_PI);
    CHECK(g.log_density(Eigen::Vector2d(1, 1)) == doctest::Approx(expected));
  }

  TEST_CASE("P_g is a distribution and P_s a frequency") {
    Gen gen(51);
    const auto cats = category_names(default_categories());
    std::vector<StructureGraph> c;
    for (int i = 0; i < 6; ++i) c.push_back(generate_scene(GeneratorParams{}, 500 + i).truth_graph);
    const PriorModel m = train_priors(c, catalog_from(default_categories()), cats);
    for (int t = 0; t < 200; ++t) {
      SGNode n;
      n.cuboid = box(0, 0, 0, gen.uniform(0.05, 3), gen.uniform(0.05, 3), gen.uniform(0.05, 2.5));
      double total = 0.0;
      for (const std::string& cat : cats) {
        const double p = m.p_g(cat, n);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        total += p;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (const std::string& a : cats)
      for (const std::string& b : cats) {
        CHECK(m.p_s(a, b) >= 0.0);
        CHECK(m.p_s(a, b) <= 1.0);
      }
    const std::set<std::string> all(cats.begin(), cats.end());
    for (const auto* s : {&m.o_c, &m.o_p, &m.o_s})
      CHECK(std::includes(all.begin(), all.end(), s->begin(), s->end()));
  }

  TEST_CASE("training ignores corpus order") {
    Gen gen(52);
    const auto cats = category_names(default_categories());
    std::vector<StructureGraph> c;
    for (int i = 0; i < 5; ++i) c.push_back(generate_scene(GeneratorParams{}, 600 + i).truth_graph);
    const PriorModel a = train_priors(c, catalog_from(default_categories()), cats);
    std::shuffle(c.begin(), c.end(), gen.engine());
    const PriorModel b = train_priors(c, catalog_from(default_categories()), cats);
    CHECK(a == b);
    CHECK(content_hash(a) == content_hash(b));
  }

  TEST_CASE("incremental retraining equals batch training") {
    const auto cats = category_names(default_categories());
    std::vector<StructureGraph> c;
    for (int i = 0; i < 8; ++i) c.push_back(generate_scene(GeneratorParams{}, 700 + i).truth_graph);
    const SizeCatalog catalog = catalog_from(default_categories());
    const PriorModel batch = train_priors(c, catalog, cats);
    const PriorModel first = train_priors(std::span(c).first(3), catalog, cats);
    const PriorModel inc = retrain_incremental(first, std::span(c).subspan(3));
    CHECK(inc == batch);
    CHECK(inc.graphs == 8);
    CHECK(content_hash(first) != content_hash(inc));
  }

  TEST_CASE("translating log features leaves P_g unchanged") {
    Gen gen(53);
    std::vector<GeomSample> samples;
    for (int i = 0; i < 30; ++i) {
      samples.push_back({"bed", gen.uniform(2.5, 3.5), gen.uniform(0.4, 0.6)});
      samples.push_back({"pillow", gen.uniform(0.1, 0.3), gen.uniform(0.1, 0.2)});
      samples.push_back({"lamp", gen.uniform(0.05, 0.15), gen.uniform(0.3, 0.7)});
    }
    for (int t = 0; t < 20; ++t) {
      const double ka = gen.uniform(0.2, 5.0), kh = gen.uniform(0.2, 5.0);
      std::vector<GeomSample> scaled = samples;
      for (GeomSample& s : scaled) {
        s.base_area *= ka;
        s.height *= kh;
      }
      const GeometricModel a = train_geometric(samples, kCats), b = train_geometric(scaled, kCats);
      const double qa = gen.uniform(0.05, 4.0), qh = gen.uniform(0.05, 1.0);
      const auto pa = a.posterior(qa, qh), pb = b.posterior(qa * ka, qh * kh);
      for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-9));
    }
  }

  TEST_CASE("geometric training errors") {
    const std::vector<GeomSample> one{{"bed", 3.0, 0.5}};
    CHECK(testing::error_code([&] { train_geometric(one, kCats); }) == Errc::insufficient_samples);
    const std::vector<GeomSample> stranger{{"sofa", 3.0, 0.5}, {"sofa", 3.1, 0.5}};
    CHECK(testing::error_code([&] { train_geometric(stranger, kCats); }) == Errc::unknown_category);
    const GeometricModel empty = train_geometric({}, kCats);
    CHECK(empty.p_g("bed", 1.0, 1.0) == 0.0);
    CHECK(testing::error_code([&] { empty.p_g("sofa", 1.0, 1.0); }) == Errc::unknown_category);
  }

  TEST_CASE("unlabeled or unknown nodes are rejected by the counters") {
    StructureGraph g = bedroom(1.0);
    g.nodes[0].label.reset();
    CHECK(testing::error_code([&] { count_support(std::vector<StructureGraph>{g}, kCats); }) == Errc::unknown_label);
    g.nodes[0].label = "wardrobe";
    CHECK(testing::error_code([&] { count_spatial(std::vector<StructureGraph>{g}, kCats); }) == Errc::unknown_label);
  }

  TEST_CASE("catalog enrichment is seeded") {
    const SizeCatalog cat = load_catalog(RGBDANN_SOURCE_DIR "/data/catalog.json");
    CHECK(cat.at("bed").size() == 3);
    const auto a = enrich_samples(cat, kCats, 10, 7), b = enrich_samples(cat, kCats, 10, 7),
               c = enrich_samples(cat, kCats, 10, 8);
    CHECK(a.size() == 30);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), [](const GeomSample& x, const GeomSample& y) {
      return x.category == y.category && x.base_area == y.base_area && x.height == y.height;
    }));
    CHECK(a[0].base_area != c[0].base_area);
    for (const GeomSample& s : a) CHECK(s.base_area > 0.0);
    CHECK(enrich_samples(cat, kCats, 0, 7).empty());
    CHECK(testing::error_code([] { load_catalog("/nonexistent/catalog.json"); }) == Errc::missing_file);
  }

  TEST_CASE("new categories start unfitted") {
    CHECK(testing::error_code([] { train_priors(corpus(3), SizeCatalog{}, kCats); }) == Errc::missing_spec);
    PriorConfig no_enrich;
    no_enrich.enrich_count = 0;
    const PriorModel m = train_priors(corpus(3), SizeCatalog{}, kCats, no_enrich);
    const std::vector<std::string> extra{"rug", "bed"};
    const PriorModel w = with_categories(m, extra);
    CHECK(w.category_list == std::vector<std::string>{"bed", "pillow", "lamp", "rug"});
    SGNode n = labeled(1, "rug", box(0, 0, 0, 1, 1, 0.02));
    CHECK(w.p_g("rug", n) == 0.0);
  }
}
