#include "rgbdann/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "rgbdann/error.hpp"
#include "rgbdann/structure_graph.hpp"

namespace rgbdann {
namespace {

double depth_jump(double z) { return 0.05 * z + 0.01; }

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  int join(int a, int b, double w) {
    if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    internal_[a] = w;
    return a;
  }
  int size(int root) const { return size_[root]; }
  double internal(int root) const { return internal_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
  std::vector<double> internal_;
};

struct PixelEdge {
  float w;
  int a, b;
};

double rgb_distance(const Rgb& p, const Rgb& q) {
  const double dr = p.r - q.r, dg = p.g - q.g, db = p.b - q.b;
  return std::sqrt(dr * dr + dg * dg + db * db);
}

std::vector<PixelEdge> grid_edges(const Image<Rgb>& img) {
  const int w = img.width(), h = img.height();
  std::vector<PixelEdge> edges;
  edges.reserve(static_cast<std::size_t>(w) * h * 4);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = static_cast<int>(img.index(x, y));
      auto add = [&](int nx, int ny) {
        if (!img.contains(nx, ny)) return;
        const int j = static_cast<int>(img.index(nx, ny));
        edges.push_back({static_cast<float>(rgb_distance(img[i], img[j])), i, j});
      };
      add(x + 1, y);
      add(x, y + 1);
      add(x + 1, y + 1);
      add(x + 1, y - 1);
    }
  std::stable_sort(edges.begin(), edges.end(), [](const PixelEdge& a, const PixelEdge& b) { return a.w < b.w; });
  return edges;
}

Image<int> relabel_raster(const std::vector<int>& roots, int w, int h) {
  Image<int> out(w, h, -1);
  std::map<int, int> ids;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    auto [it, fresh] = ids.try_emplace(roots[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  return out;
}

bool facing_camera_flip(Vec3& n, const Vec3& p) {
  if (n.dot(p) > 0.0) {
    n = -n;
    return true;
  }
  return false;
}

}  // namespace

NormalMap compute_normals(const RgbdFrame& frame, int window) {
  const int w = frame.width(), h = frame.height();
  const int r = std::max(1, window / 2);
  NormalMap out(w, h, Vec3::Zero());
  Image<Vec3> pts(w, h, Vec3::Zero());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (frame.valid(x, y)) pts(x, y) = frame.point(x, y);

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!frame.valid(x, y)) continue;
      const double zc = frame.depth(x, y);
      const double jump = depth_jump(zc);
      Vec3 sum = Vec3::Zero();
      Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
      int n = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (!frame.depth.contains(nx, ny) || !frame.valid(nx, ny)) continue;
          if (std::abs(frame.depth(nx, ny) - zc) > jump) continue;
          const Vec3& p = pts(nx, ny);
          sum += p;
          outer += p * p.transpose();
          ++n;
        }
      if (n < 3) continue;
      const Vec3 mean = sum / n;
      const Eigen::Matrix3d cov = outer / n - mean * mean.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
      es.computeDirect(cov);
      const auto& ev = es.eigenvalues();
      if (ev(1) <= 1e-12 * std::max(1.0, ev(2))) continue;  // collinear neighborhood
      Vec3 normal = es.eigenvectors().col(0).normalized();
      facing_camera_flip(normal, pts(x, y) - frame.viewpoint);
      out(x, y) = normal;
    }
  return out;
}

Image<Rgb> encode_normals(const NormalMap& normals) {
  Image<Rgb> out(normals.width(), normals.height());
  auto code = [](double c) { return static_cast<std::uint8_t>(std::lround(std::clamp((c + 1.0) * 0.5, 0.0, 1.0) * 255.0)); };
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const Vec3& n = normals[i];
    out[i] = {code(n.x()), code(n.y()), code(n.z())};
  }
  return out;
}

Image<int> graph_segment(const Image<Rgb>& image, double k, int min_size) {
  const int w = image.width(), h = image.height();
  const auto edges = grid_edges(image);
  DisjointSets sets(image.size());
  for (const PixelEdge& e : edges) {
    const int a = sets.find(e.a), b = sets.find(e.b);
    if (a == b) continue;
    const double ta = sets.internal(a) + k / sets.size(a);
    const double tb = sets.internal(b) + k / sets.size(b);
    if (e.w <= std::min(ta, tb)) sets.join(a, b, e.w);
  }
  for (const PixelEdge& e : edges) {
    const int a = sets.find(e.a), b = sets.find(e.b);
    if (a != b && (sets.size(a) < min_size || sets.size(b) < min_size)) sets.join(a, b, e.w);
  }
  std::vector<int> roots(image.size());
  for (std::size_t i = 0; i < roots.size(); ++i) roots[i] = sets.find(static_cast<int>(i));
  return relabel_raster(roots, w, h);
}

Segment make_segment(int id, std::vector<int> pixels, const RgbdFrame& frame, const NormalMap& normals,
                     const RansacOptions& ransac) {
  Segment s;
  s.id = id;
  s.pixels = std::move(pixels);
  const int w = frame.width();
  Vec3 normal_sum = Vec3::Zero();
  for (int idx : s.pixels) {
    const int x = idx % w, y = idx / w;
    if (!frame.valid(x, y)) continue;
    s.points.push_back(frame.point(x, y));
    s.point_normals.push_back(normals.empty() ? Vec3::Zero() : normals[idx]);
    normal_sum += s.point_normals.back();
  }
  if (s.points.size() >= 3) {
    try {
      RansacOptions opts = ransac;
      opts.seed = ransac.seed + static_cast<std::uint64_t>(id);
      s.plane = fit_plane_ransac(s.points, opts).plane.facing(frame.viewpoint);
    } catch (const Error&) {
      s.plane.reset();
    }
  }
  if (s.plane) {
    s.normal = s.plane->normal;
  } else if (normal_sum.norm() > 1e-9) {
    s.normal = normal_sum.normalized();
  }
  return s;
}

std::vector<Segment> oversegment(const RgbdFrame& frame, const NormalMap& normals, const OversegmentOptions& opts) {
  const int w = frame.width(), h = frame.height();
  if (normals.width() != w || normals.height() != h)
    throw Error(Errc::dimension_mismatch, "normal map does not match the frame");
  const Image<Rgb> coded = encode_normals(normals);
  const Image<int> color_labels = graph_segment(frame.color, opts.k_color, opts.min_size);
  const Image<int> normal_labels = graph_segment(coded, opts.k_normal, opts.min_size);

  auto continuous = [&](std::size_t a, std::size_t b) {
    const float za = frame.depth[a], zb = frame.depth[b];
    if (za <= 0.0f || zb <= 0.0f) return za <= 0.0f && zb <= 0.0f;
    return std::abs(za - zb) <= depth_jump(std::min(za, zb));
  };
  // Depth-continuous components act as a third labeling.
  std::vector<int> depth_labels(frame.color.size());
  {
    DisjointSets sets(frame.color.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = frame.color.index(x, y);
        const int nbr[4][2] = {{x + 1, y}, {x, y + 1}, {x + 1, y + 1}, {x + 1, y - 1}};
        for (const auto& q : nbr) {
          if (!frame.color.contains(q[0], q[1])) continue;
          const std::size_t j = frame.color.index(q[0], q[1]);
          const int a = sets.find(static_cast<int>(i)), b = sets.find(static_cast<int>(j));
          if (a != b && continuous(i, j)) sets.join(a, b, 0.0);
        }
      }
    for (std::size_t i = 0; i < depth_labels.size(); ++i) depth_labels[i] = sets.find(static_cast<int>(i));
  }

  // Intersect the labelings.
  std::vector<int> region(frame.color.size());
  std::vector<int> region_color;
  {
    std::map<std::tuple<int, int, int>, int> ids;
    for (std::size_t i = 0; i < region.size(); ++i) {
      auto [it, fresh] =
          ids.try_emplace({color_labels[i], normal_labels[i], depth_labels[i]}, static_cast<int>(ids.size()));
      region[i] = it->second;
      if (fresh) region_color.push_back(color_labels[i]);
    }
  }
  const int n = region.empty() ? 0 : *std::max_element(region.begin(), region.end()) + 1;

  // Merge regions below min_size into their most similar neighbor.
  using Feature = Eigen::Matrix<double, 6, 1>;
  std::vector<Feature> sum(n, Feature::Zero());
  std::vector<int> count(n, 0);
  std::vector<std::set<int>> adjacent(n), smooth(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = frame.color.index(x, y);
      const Rgb& c = frame.color[i];
      const Rgb& nc = coded[i];
      Feature f;
      f << c.r, c.g, c.b, nc.r, nc.g, nc.b;
      sum[region[i]] += f;
      ++count[region[i]];
      const int nbr[4][2] = {{x + 1, y}, {x, y + 1}, {x + 1, y + 1}, {x + 1, y - 1}};
      for (const auto& q : nbr) {
        if (!frame.color.contains(q[0], q[1])) continue;
        const std::size_t j = frame.color.index(q[0], q[1]);
        const int a = region[i], b = region[j];
        if (a != b) {
          adjacent[a].insert(b);
          adjacent[b].insert(a);
          if (continuous(i, j)) {
            smooth[a].insert(b);
            smooth[b].insert(a);
          }
        }
      }
    }
  std::vector<int> merged_into(n);
  std::iota(merged_into.begin(), merged_into.end(), 0);
  auto root = [&](int r) {
    while (merged_into[r] != r) r = merged_into[r];
    return r;
  };
  std::set<std::pair<int, int>> small;  // (size, id)
  for (int r = 0; r < n; ++r)
    if (count[r] < opts.min_size) small.insert({count[r], r});
  while (!small.empty()) {
    const int r = small.begin()->second;
    small.erase(small.begin());
    // Prefer depth-continuous neighbors from the same color region.
    std::set<int> nbrs;
    for (int q : smooth[r])
      if (root(q) != r && region_color[root(q)] == region_color[r]) nbrs.insert(root(q));
    if (nbrs.empty())
      for (int q : smooth[r])
        if (root(q) != r) nbrs.insert(root(q));
    if (nbrs.empty())
      for (int q : adjacent[r])
        if (root(q) != r) nbrs.insert(root(q));
    if (nbrs.empty()) continue;
    const Feature mean = sum[r] / count[r];
    int best = -1;
    double best_d = 0.0;
    for (int q : nbrs) {
      const double d = (sum[q] / count[q] - mean).norm();
      if (best < 0 || d < best_d) {
        best = q;
        best_d = d;
      }
    }
    small.erase({count[best], best});
    merged_into[r] = best;
    sum[best] += sum[r];
    count[best] += count[r];
    adjacent[best].insert(adjacent[r].begin(), adjacent[r].end());
    adjacent[r].clear();
    smooth[best].insert(smooth[r].begin(), smooth[r].end());
    smooth[r].clear();
    if (count[best] < opts.min_size) small.insert({count[best], best});
  }

  std::vector<int> roots(region.size());
  for (std::size_t i = 0; i < region.size(); ++i) roots[i] = root(region[i]);
  const Image<int> labels = relabel_raster(roots, w, h);
  int segments_n = 0;
  for (int v : labels.data()) segments_n = std::max(segments_n, v + 1);
  std::vector<std::vector<int>> pixels(segments_n);
  for (std::size_t i = 0; i < labels.size(); ++i) pixels[labels[i]].push_back(static_cast<int>(i));
  std::vector<Segment> out;
  out.reserve(segments_n);
  for (int id = 0; id < segments_n; ++id) out.push_back(make_segment(id, std::move(pixels[id]), frame, normals, opts.ransac));
  return out;
}

Image<int> label_image(std::span<const Segment> segments, int width, int height) {
  Image<int> out(width, height, -1);
  for (std::size_t s = 0; s < segments.size(); ++s)
    for (int idx : segments[s].pixels) out[idx] = static_cast<int>(s);
  return out;
}

std::vector<int> rasterize_scribble(const Scribble& s, int width, int height) {
  if (s.polyline.empty()) throw Error(Errc::invariant_violation, "empty scribble");
  std::set<int> out;
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= width || y >= height)
      throw Error(Errc::invariant_violation, "scribble pixel out of bounds");
    out.insert(y * width + x);
  };
  put(s.polyline.front()[0], s.polyline.front()[1]);
  for (std::size_t i = 1; i < s.polyline.size(); ++i) {
    int x0 = s.polyline[i - 1][0], y0 = s.polyline[i - 1][1];
    const int x1 = s.polyline[i][0], y1 = s.polyline[i][1];
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      put(x0, y0);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  return {out.begin(), out.end()};
}

ScribbleResult scribble_segment(const RgbdFrame& frame, std::span<const Segment> segments,
                                std::span<const Scribble> strokes) {
  const int w = frame.width(), h = frame.height();
  const Image<int> labels = label_image(segments, w, h);
  std::set<int> fg, bg;
  for (const Scribble& s : strokes)
    for (int idx : rasterize_scribble(s, w, h)) {
      if (labels[idx] < 0) continue;
      (s.kind == Scribble::Kind::foreground ? fg : bg).insert(labels[idx]);
    }
  ScribbleResult result;
  bool any_fg_stroke = false;
  for (const Scribble& s : strokes) any_fg_stroke |= s.kind == Scribble::Kind::foreground;
  if (!any_fg_stroke) throw Error(Errc::no_foreground, "no foreground stroke");
  for (int s : bg)
    if (fg.erase(s)) result.warnings.push_back("ConflictingStroke: segment " + std::to_string(segments[s].id) +
                                               " hit by both stroke kinds; background wins");
  if (fg.empty()) throw Error(Errc::no_foreground, "every foreground segment is also marked background");

  using Feature = Eigen::Vector4d;
  const std::size_t n = segments.size();
  std::vector<Feature> feature(n, Feature::Zero());
  std::vector<double> weight(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    Vec3 color = Vec3::Zero();
    double depth = 0.0;
    int valid = 0;
    for (int idx : segments[s].pixels) {
      const Rgb& c = frame.color[idx];
      color += Vec3(c.r, c.g, c.b) / 255.0;
      if (frame.depth[idx] > 0.0f) {
        depth += frame.depth[idx];
        ++valid;
      }
    }
    const double np = std::max<std::size_t>(segments[s].pixels.size(), 1);
    feature[s] << color / np, 0.5 * (valid ? depth / valid : 0.0);
    weight[s] = static_cast<double>(segments[s].pixels.size());
  }
  auto pooled = [&](auto&& pick) {
    Feature f = Feature::Zero();
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      if (pick(s)) {
        f += weight[s] * feature[s];
        total += weight[s];
      }
    return total > 0.0 ? Feature(f / total) : f;
  };
  const Feature fg_stat = pooled([&](std::size_t s) { return fg.contains(static_cast<int>(s)); });
  const Feature bg_stat = bg.empty() ? pooled([&](std::size_t s) { return !fg.contains(static_cast<int>(s)); })
                                     : pooled([&](std::size_t s) { return bg.contains(static_cast<int>(s)); });

  std::vector<char> selected(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    const int si = static_cast<int>(s);
    if (fg.contains(si)) selected[s] = 1;
    else if (!bg.contains(si)) selected[s] = (feature[s] - fg_stat).norm() < (feature[s] - bg_stat).norm();
  }

  // Keep only selected components that touch a foreground stroke.
  std::vector<std::set<int>> adjacent(n), smooth(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int a = labels(x, y);
      if (a < 0) continue;
      const int nbr[2][2] = {{x + 1, y}, {x, y + 1}};
      for (const auto& q : nbr) {
        if (!labels.contains(q[0], q[1])) continue;
        const int b = labels(q[0], q[1]);
        if (b >= 0 && b != a) {
          adjacent[a].insert(b);
          adjacent[b].insert(a);
        }
      }
    }
  std::vector<char> keep(n, 0);
  std::vector<int> stack(fg.begin(), fg.end());
  for (int s : stack) keep[s] = 1;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (int q : adjacent[s])
      if (selected[q] && !keep[q]) {
        keep[q] = 1;
        stack.push_back(q);
      }
  }
  for (std::size_t s = 0; s < n; ++s)
    if (keep[s]) {
      result.segments.push_back(static_cast<int>(s));
      result.pixels.insert(result.pixels.end(), segments[s].pixels.begin(), segments[s].pixels.end());
    }
  std::sort(result.pixels.begin(), result.pixels.end());
  return result;
}

std::vector<Segment> refine_segments(const StructureGraph& graph, std::vector<Segment> segments,
                                     const RgbdFrame& frame) {
  const int w = frame.width();
  struct Box {
    int x0, y0, x1, y1;
  };
  std::vector<Box> bounds(segments.size());
  for (std::size_t s = 0; s < segments.size(); ++s) {
    Box b{w, frame.height(), -1, -1};
    for (int idx : segments[s].pixels) {
      b.x0 = std::min(b.x0, idx % w);
      b.x1 = std::max(b.x1, idx % w);
      b.y0 = std::min(b.y0, idx / w);
      b.y1 = std::max(b.y1, idx / w);
    }
    bounds[s] = b;
  }

  std::vector<int> claimed(segments.size(), -1);
  std::vector<int> order = graph.level_order();
  std::reverse(order.begin(), order.end());
  for (int id : order) {
    const SGNode& node = graph.node(id);
    std::vector<Vec2> projected;
    for (const Vec3& c : node.cuboid.corners()) {
      const Vec3 p = c - frame.viewpoint;
      if (p.z() > 1e-3) projected.push_back(frame.intrinsics.project(p));
    }
    std::vector<Vec2> hull;
    try {
      if (projected.size() >= 3) hull = convex_hull_2d(projected);
    } catch (const Error&) {
      hull.clear();
    }
    auto in_hull = [&](double x, double y) {
      for (std::size_t k = 0; k < hull.size(); ++k) {
        const Vec2& a = hull[k];
        const Vec2& b = hull[(k + 1) % hull.size()];
        if ((b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x()) < 0.0) return false;
      }
      return true;
    };
    double hx0 = 1e300, hy0 = 1e300, hx1 = -1e300, hy1 = -1e300;
    for (const Vec2& p : hull) {
      hx0 = std::min(hx0, p.x());
      hx1 = std::max(hx1, p.x());
      hy0 = std::min(hy0, p.y());
      hy1 = std::max(hy1, p.y());
    }
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const Segment& seg = segments[s];
      if (claimed[s] >= 0 || seg.tag == SegmentTag::floor || seg.tag == SegmentTag::wall) continue;
      bool candidate = seg.tag == SegmentTag::object && seg.owner == id;
      if (!candidate && !hull.empty() && bounds[s].x1 >= hx0 && bounds[s].x0 <= hx1 && bounds[s].y1 >= hy0 &&
          bounds[s].y0 <= hy1)
        candidate = std::any_of(seg.pixels.begin(), seg.pixels.end(),
                                [&](int idx) { return in_hull(idx % w, idx / w); });
      if (!candidate || seg.points.empty()) continue;
      const auto inside = std::count_if(seg.points.begin(), seg.points.end(), [&](const Vec3& p) {
        return node.cuboid.contains_point(p, kAbsorbInflation);
      });
      if (static_cast<double>(inside) >= kAbsorbRatio * static_cast<double>(seg.points.size())) claimed[s] = id;
    }
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    Segment& seg = segments[s];
    if (claimed[s] >= 0) {
      seg.tag = SegmentTag::object;
      seg.owner = claimed[s];
      seg.label = graph.node(claimed[s]).label;
    } else if (seg.tag == SegmentTag::object) {
      seg.tag = SegmentTag::unlabeled;
      seg.owner = -1;
      seg.label.reset();
    }
  }
  return segments;
}

std::map<int, std::vector<int>> majority_masks(const Image<int>& ids, std::span<const int> objects,
                                               std::span<const Segment> segments) {
  std::map<int, std::vector<int>> out;
  std::map<int, std::pair<int, int>> largest;  // object -> (pixels, segment)
  for (int id : objects) out[id];
  std::vector<char> taken(segments.size(), 0);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    std::map<int, int> votes;
    for (int px : segments[i].pixels) ++votes[ids[px]];
    int best = 0, best_count = -1;
    for (const auto& [id, count] : votes) {
      if (count > best_count) {
        best = id;
        best_count = count;
      }
      if (id != 0 && count > largest[id].first) largest[id] = {count, static_cast<int>(i)};
    }
    if (best != 0 && out.contains(best)) {
      out[best].push_back(static_cast<int>(i));
      taken[i] = 1;
    }
  }
  for (auto& [id, members] : out) {
    auto it = largest.find(id);
    if (members.empty() && it != largest.end() && !taken[it->second.second]) {
      members.push_back(it->second.second);
      taken[it->second.second] = 1;
    }
  }
  return out;
}

}  // namespace rgbdann
