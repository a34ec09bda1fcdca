#include <doctest.h>

#include <algorithm>
#include <set>

#include "rgbdann/evaluation.hpp"
#include "rgbdann/segmentation.hpp"
#include "rgbdann/simgen.hpp"
#include "support.hpp"

using namespace rgbdann;

namespace {

// Left half: red wall at 2 m. Right half: blue wall at 3 m.
RgbdFrame two_halves(int w = 48, int h = 32) {
  RgbdFrame f;
  f.frame_id = "halves";
  f.color = Image<Rgb>(w, h);
  f.depth = Image<float>(w, h);
  f.intrinsics = {60.0, 60.0, (w - 1) / 2.0, (h - 1) / 2.0};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool left = x < w / 2;
      f.color(x, y) = left ? Rgb{200, 30, 30} : Rgb{30, 30, 200};
      f.depth(x, y) = left ? 2.0f : 3.0f;
    }
  return f;
}

void check_partition(const std::vector<Segment>& segments, int w, int h) {
  std::vector<int> seen(static_cast<std::size_t>(w) * h, 0);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    CHECK(segments[i].id == static_cast<int>(i));
    CHECK(std::is_sorted(segments[i].pixels.begin(), segments[i].pixels.end()));
    for (int p : segments[i].pixels) ++seen[p];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

}  // namespace

TEST_SUITE("segmentation") {
  TEST_CASE("graph segmentation separates flat colors") {
    Image<Rgb> img(20, 10, Rgb{0, 0, 0});
    for (int y = 0; y < 10; ++y)
      for (int x = 10; x < 20; ++x) img(x, y) = {255, 255, 255};
    const Image<int> labels = graph_segment(img, 300.0, 5);
    CHECK(labels(0, 0) == 0);
    CHECK(labels(19, 9) == 1);
    std::set<int> distinct(labels.data().begin(), labels.data().end());
    CHECK(distinct.size() == 2);
  }

  TEST_CASE("small regions are merged up to min_size") {
    Image<Rgb> img(20, 20, Rgb{0, 0, 0});
    img(5, 5) = {255, 255, 255};
    const Image<int> labels = graph_segment(img, 1.0, 4);
    std::set<int> distinct(labels.data().begin(), labels.data().end());
    CHECK(distinct.size() == 1);
  }

  TEST_CASE("normals of a fronto-parallel plane face the camera") {
    const RgbdFrame f = two_halves();
    const NormalMap n = compute_normals(f);
    CHECK(n(5, 16).isApprox(Vec3(0, 0, -1), 1e-6));
    CHECK(n(40, 16).isApprox(Vec3(0, 0, -1), 1e-6));
    const Image<Rgb> coded = encode_normals(n);
    CHECK(coded(5, 16).b == 0);
  }

  TEST_CASE("oversegment partitions the image") {
    const RgbdFrame f = two_halves();
    const auto segments = oversegment(f, compute_normals(f));
    check_partition(segments, f.width(), f.height());
    const Image<int> labels = label_image(segments, f.width(), f.height());
    for (int y = 0; y < f.height(); ++y) CHECK(labels(0, y) != labels(f.width() - 1, y));

    for (std::uint64_t seed : {3u, 8u}) {
      GeneratorParams p;
      p.noise_k = 0.001;
      p.occlusion_rate = 0.3;
      const SyntheticScene s = generate_scene(p, seed);
      check_partition(oversegment(s.frame, compute_normals(s.frame)), s.frame.width(), s.frame.height());
    }
  }

  TEST_CASE("oversegment is deterministic") {
    const SyntheticScene s = generate_scene(GeneratorParams{}, 4);
    const NormalMap n = compute_normals(s.frame);
    CHECK(oversegment(s.frame, n) == oversegment(s.frame, n));
  }

  TEST_CASE("oversegment rejects mismatched normals") {
    const RgbdFrame f = two_halves();
    CHECK(testing::error_code([&] { oversegment(f, NormalMap(3, 3)); }) == Errc::dimension_mismatch);
  }

  TEST_CASE("scribble result is a union of whole segments") {
    const RgbdFrame f = two_halves();
    const auto segments = oversegment(f, compute_normals(f));
    const std::vector<Scribble> strokes{{{{{3, 3}}, {{10, 20}}}, Scribble::Kind::foreground},
                                        {{{{40, 3}}, {{40, 28}}}, Scribble::Kind::background}};
    const ScribbleResult r = scribble_segment(f, segments, strokes);
    REQUIRE_FALSE(r.segments.empty());
    std::vector<int> expected;
    for (int s : r.segments) expected.insert(expected.end(), segments[s].pixels.begin(), segments[s].pixels.end());
    std::sort(expected.begin(), expected.end());
    CHECK(r.pixels == expected);
    for (int p : r.pixels) CHECK(p % f.width() < f.width() / 2);
  }

  TEST_CASE("scribble errors and conflicts") {
    const RgbdFrame f = two_halves();
    const auto segments = oversegment(f, compute_normals(f));
    const std::vector<Scribble> bg_only{{{{{3, 3}}, {{10, 3}}}, Scribble::Kind::background}};
    CHECK(testing::error_code([&] { scribble_segment(f, segments, bg_only); }) == Errc::no_foreground);
    const std::vector<Scribble> clash{{{{{3, 3}}, {{3, 5}}}, Scribble::Kind::foreground},
                                      {{{{3, 4}}, {{4, 4}}}, Scribble::Kind::background}};
    CHECK(testing::error_code([&] { scribble_segment(f, segments, clash); }) == Errc::no_foreground);
  }

  TEST_CASE("rasterized strokes cover the polyline end points") {
    const Scribble s{{{{0, 0}}, {{5, 3}}, {{5, 9}}}, Scribble::Kind::foreground};
    const auto px = rasterize_scribble(s, 10, 10);
    CHECK(std::is_sorted(px.begin(), px.end()));
    CHECK(std::binary_search(px.begin(), px.end(), 0));
    CHECK(std::binary_search(px.begin(), px.end(), 3 * 10 + 5));
    CHECK(std::binary_search(px.begin(), px.end(), 9 * 10 + 5));
  }

  TEST_CASE("majority masks: ties go to the lower id, empty objects take their largest share") {
    Image<int> ids(4, 1, 0);
    ids[0] = 2;
    ids[1] = 1;
    ids[2] = 3;
    ids[3] = 0;
    std::vector<Segment> segs(2);
    segs[0].pixels = {0, 1};
    segs[1].pixels = {2, 3};
    const std::vector<int> objects{1, 2, 3};
    const auto m = majority_masks(ids, objects, segs);
    CHECK(m.at(1) == std::vector<int>{0});
    CHECK(m.at(2).empty());
    // Segment 1 is a 0/3 tie: background wins, then object 3 claims it as its largest share.
    CHECK(m.at(3) == std::vector<int>{1});
  }

  TEST_CASE("refine_segments is idempotent and single-owner") {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
      GeneratorParams p;
      p.noise_k = 0.001;
      const SyntheticScene s = generate_scene(p, seed);
      auto segments = oversegment(s.frame, compute_normals(s.frame));
      std::vector<int> ids;
      for (const ObjectRecord& o : s.truth.objects) ids.push_back(o.id);
      for (const auto& [id, members] : majority_masks(s.object_ids, ids, segments))
        for (int m : members) {
          segments[m].tag = SegmentTag::object;
          segments[m].owner = id;
        }
      const auto once = refine_segments(s.truth_graph, segments, s.frame);
      const auto twice = refine_segments(s.truth_graph, once, s.frame);
      CHECK(once == twice);
      for (const Segment& seg : once) {
        if (seg.tag == SegmentTag::object) {
          REQUIRE(seg.owner > 0);
          CHECK(seg.label == s.truth_graph.node(seg.owner).label);
        } else {
          CHECK(seg.owner == -1);
        }
      }
    }
  }
}
