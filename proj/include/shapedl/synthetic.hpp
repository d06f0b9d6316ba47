#pragma once

// Random descriptions, refinements and scenes for property tests, plus the
// rendered 30-scene retrieval suite with constructed gold rankings.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "shapedl/evaluation.hpp"
#include "shapedl/model.hpp"
#include "shapedl/raster.hpp"
#include "shapedl/segmentation.hpp"
#include "shapedl/shapes.hpp"

namespace shapedl::synth {

using Rng = std::mt19937_64;

inline std::vector<BasicShape> palette_shapes(const FeatureConfig& cfg = {}) {
  std::vector<BasicShape> out;
  for (const auto& s : shapes::standard_palette()) out.emplace_back(s.id, s.contour, cfg);
  return out;
}

inline constexpr std::size_t kVividHues = 7;

/// Fully saturated, full-value palette entry for hue bin h.
inline ColorRGB vivid_color(std::size_t hue) { return palette()[(hue % kVividHues) * 16 + 15]; }

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

inline double bounding_radius(const ShapeComponent& c) {
  double r = 0.0;
  for (const Vec2& p : c.shape.contour().points()) r = std::max(r, norm(p));
  return r * c.transform.s;
}

struct Bounds {
  double width = 400.0;
  double height = 400.0;
  double min_scale = 0.7;
  double max_scale = 1.4;
  double gap = 6.0;  // clearance between bounding circles
};

/// Keeps placed components pairwise separated by their bounding circles, so
/// any accepted layout is satisfiable and survives rasterization.
class Placer {
 public:
  explicit Placer(Bounds b) : b_(b) {}

  bool fits(const ShapeComponent& c) const {
    const Vec2 p = c.placed_centroid();
    const double r = bounding_radius(c);
    if (p.x - r < b_.gap || p.y - r < b_.gap || p.x + r > b_.width - b_.gap || p.y + r > b_.height - b_.gap)
      return false;
    for (const auto& [q, rq] : circles_)
      if (distance(p, q) < r + rq + b_.gap) return false;
    return true;
  }

  void add(const ShapeComponent& c) { circles_.emplace_back(c.placed_centroid(), bounding_radius(c)); }

  bool try_add(const ShapeComponent& c) {
    if (!fits(c)) return false;
    add(c);
    return true;
  }

  /// Random pose for shape inside the bounds, or nullopt after many misses.
  std::optional<ShapeComponent> place(Rng& rng, const BasicShape& shape, std::optional<ColorRGB> color,
                                      int attempts = 200) {
    for (int a = 0; a < attempts; ++a) {
      ShapeComponent c{color, std::nullopt,
                       Transform{uniform(rng, 0, b_.width), uniform(rng, 0, b_.height),
                                 uniform(rng, -std::numbers::pi, std::numbers::pi),
                                 uniform(rng, b_.min_scale, b_.max_scale)},
                       shape};
      if (try_add(c)) return c;
    }
    return std::nullopt;
  }

  const Bounds& bounds() const { return b_; }

 private:
  Bounds b_;
  std::vector<std::pair<Vec2, double>> circles_;
};

inline std::optional<ColorRGB> random_color(Rng& rng, double null_probability = 0.0) {
  if (null_probability > 0.0 && uniform(rng, 0, 1) < null_probability) return std::nullopt;
  return vivid_color(pick(rng, kVividHues));
}

/// n components with random shapes, poses and colors; satisfiable by construction.
inline CompositeDescription random_description(Rng& rng, const std::vector<BasicShape>& shapes, std::size_t n,
                                               const std::string& id, Bounds b = {},
                                               double null_color_probability = 0.0) {
  for (;;) {
    Placer placer(b);
    std::vector<ShapeComponent> comps;
    for (std::size_t k = 0; k < n; ++k) {
      auto c = placer.place(rng, shapes[pick(rng, shapes.size())], random_color(rng, null_color_probability));
      if (!c) break;
      comps.push_back(std::move(*c));
    }
    if (comps.size() == n) return CompositeDescription(id, std::move(comps));
  }
}

/// d plus one extra component placed clear of the existing ones.
inline std::optional<CompositeDescription> refine(Rng& rng, const CompositeDescription& d,
                                                  const std::vector<BasicShape>& shapes, const std::string& id,
                                                  Bounds b = {}) {
  Placer placer(b);
  for (const auto& c : d.components) placer.add(c);
  auto extra = placer.place(rng, shapes[pick(rng, shapes.size())], random_color(rng));
  if (!extra) return std::nullopt;
  auto comps = d.components;
  comps.push_back(std::move(*extra));
  return CompositeDescription(id, std::move(comps));
}

/// Every component moved by one global similarity transform.
inline std::vector<ShapeComponent> transformed(std::vector<ShapeComponent> comps, const Transform& g) {
  for (auto& c : comps) c.transform = compose(g, c.transform);
  return comps;
}

inline SegmentedImage image_of(const std::vector<ShapeComponent>& comps, const std::string& id,
                               const FeatureConfig& cfg = {}) {
  SegmentedImage img;
  img.id = id;
  for (const auto& c : comps) img.regions.emplace_back(c.placed_contour(), c.color, c.texture, cfg);
  return img;
}

struct SceneOptions {
  double jitter = 0.0;        // per-component pose noise, relative to size
  double drop_probability = 0.0;
  std::size_t max_distractors = 2;
  bool shuffle = true;
};

/// Scene built around d: a possibly jittered copy (components may be dropped)
/// plus random distractors, in shuffled region order.
inline SegmentedImage random_scene(Rng& rng, const CompositeDescription& d, const std::vector<BasicShape>& shapes,
                                   const std::string& id, const SceneOptions& opt = {}, Bounds b = {},
                                   const FeatureConfig& cfg = {}) {
  for (;;) {
    Placer placer(b);
    std::vector<ShapeComponent> comps;
    bool ok = true;
    for (const auto& c : d.components) {
      if (opt.drop_probability > 0.0 && uniform(rng, 0, 1) < opt.drop_probability) continue;
      ShapeComponent moved = c;
      if (opt.jitter > 0.0) {
        const double r = bounding_radius(c);
        moved.transform.tx += uniform(rng, -opt.jitter, opt.jitter) * r;
        moved.transform.ty += uniform(rng, -opt.jitter, opt.jitter) * r;
        moved.transform.theta += uniform(rng, -opt.jitter, opt.jitter) * std::numbers::pi;
        moved.transform.s *= 1.0 + uniform(rng, -opt.jitter, opt.jitter);
      }
      if (!placer.try_add(moved)) {
        ok = false;
        break;
      }
      comps.push_back(std::move(moved));
    }
    if (!ok) continue;
    const std::size_t extras = opt.max_distractors ? pick(rng, opt.max_distractors + 1) : 0;
    for (std::size_t e = 0; e < extras; ++e)
      if (auto c = placer.place(rng, shapes[pick(rng, shapes.size())], random_color(rng))) comps.push_back(*c);
    if (comps.empty()) continue;
    if (opt.shuffle) std::shuffle(comps.begin(), comps.end(), rng);
    return image_of(comps, id, cfg);
  }
}

inline Transform random_similarity(Rng& rng) {
  return {uniform(rng, -200, 200), uniform(rng, -200, 200), uniform(rng, -std::numbers::pi, std::numbers::pi),
          uniform(rng, 0.5, 2.5)};
}

inline SegmentedImage transform_image(const SegmentedImage& img, const Transform& g, const FeatureConfig& cfg = {}) {
  SegmentedImage out;
  out.id = img.id;
  out.source = img.source;
  for (const auto& r : img.regions)
    out.regions.emplace_back(apply_transform(g, r.contour()), r.color(), r.texture(), cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Rendered retrieval suite

inline RasterImage render(const std::vector<ShapeComponent>& comps, int width, int height) {
  RasterImage img(width, height);
  for (const auto& c : comps) {
    const Contour placed = c.placed_contour();
    fill_polygon(img, placed.points(), c.color.value_or(ColorRGB{0, 0, 0}));
  }
  return img;
}

/// Farthest bounding-circle reach from the mean component centroid.
inline double arrangement_radius(const CompositeDescription& d) {
  Vec2 mean{};
  for (const auto& c : d.components) mean = mean + c.placed_centroid();
  mean = mean * (1.0 / static_cast<double>(d.size()));
  double r = 0.0;
  for (const auto& c : d.components) r = std::max(r, distance(c.placed_centroid(), mean) + bounding_radius(c));
  return r;
}

struct SuiteScene {
  std::string id;
  RasterImage raster;
};

struct SyntheticSuite {
  std::vector<BasicShape> shapes;
  std::vector<CompositeDescription> queries;
  std::vector<SuiteScene> scenes;
  GoldRankings gold;
};

inline constexpr std::size_t kSuiteQueries = 3;
inline constexpr std::size_t kScenesPerQuery = 10;
inline constexpr std::size_t kFullScenesPerQuery = 6;
inline constexpr int kSceneWidth = 320;
inline constexpr int kSceneHeight = 240;
inline constexpr std::uint64_t kSuiteSeed = 20260923;

/// Three arrangements of 2-3 palette shapes. Per query, six scenes hold the
/// whole arrangement under a random similarity transform and four miss one
/// component; gold ranks the former above the latter. Distractors never use
/// the query's shapes.
inline SyntheticSuite build_synthetic_suite(std::uint64_t seed = kSuiteSeed, const FeatureConfig& cfg = {}) {
  Rng rng(seed);
  SyntheticSuite suite;
  suite.shapes = palette_shapes(cfg);
  const Bounds local{160.0, 160.0, 1.0, 1.3, 8.0};
  for (std::size_t q = 0; q < kSuiteQueries; ++q) {
    const std::string qid = "query-" + std::to_string(q + 1);
    CompositeDescription query;
    do {
      query = random_description(rng, suite.shapes, 2 + q % 2, qid, local);
    } while (arrangement_radius(query) > 85.0);
    std::vector<BasicShape> others;
    for (const auto& s : suite.shapes)
      if (std::none_of(query.components.begin(), query.components.end(),
                       [&](const ShapeComponent& c) { return c.shape.id() == s.id(); }))
        others.push_back(s);

    Ranking gold;
    gold.tiers.resize(2);
    for (std::size_t k = 0; k < kScenesPerQuery; ++k) {
      const std::string sid = "scene-" + std::to_string(q * kScenesPerQuery + k + 1);
      const bool full = k < kFullScenesPerQuery;
      const Bounds canvas{double(kSceneWidth), double(kSceneHeight), 1.0, 1.0, 6.0};
      for (;;) {
        // Centre the arrangement, then pose it globally.
        Vec2 mean{};
        for (const auto& c : query.components) mean = mean + c.placed_centroid();
        mean = mean * (1.0 / static_cast<double>(query.size()));
        const Transform to_origin{-mean.x, -mean.y, 0.0, 1.0};
        const Transform pose{uniform(rng, 90, kSceneWidth - 90.0), uniform(rng, 90, kSceneHeight - 90.0),
                             uniform(rng, -std::numbers::pi, std::numbers::pi), uniform(rng, 0.85, 1.15)};
        auto comps = transformed(query.components, compose(pose, to_origin));
        if (!full) comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(k % comps.size()));
        Placer placer(canvas);
        if (!std::all_of(comps.begin(), comps.end(), [&](const ShapeComponent& c) { return placer.try_add(c); }))
          continue;
        const std::size_t extras = 1 + pick(rng, 2);
        for (std::size_t e = 0; e < extras; ++e)
          if (auto c = placer.place(rng, others[pick(rng, others.size())], random_color(rng), 400))
            comps.push_back(*c);
        suite.scenes.push_back({sid, render(comps, kSceneWidth, kSceneHeight)});
        gold.tiers[full ? 0 : 1].push_back(sid);
        break;
      }
    }
    suite.queries.push_back(query);
    suite.gold.emplace(qid, std::move(gold));
  }
  return suite;
}

inline std::vector<SegmentedImage> segment_suite(const SyntheticSuite& suite, const SegmentConfig& cfg = {}) {
  std::vector<SegmentedImage> out;
  for (const auto& s : suite.scenes) out.push_back(segment_synthetic(s.raster, s.id, cfg));
  return out;
}

/// Render, segment and evaluate the suite end to end.
inline ExperimentReport run_synthetic_experiment(const MatchConfig& cfg = {}, std::uint64_t seed = kSuiteSeed) {
  const SyntheticSuite suite = build_synthetic_suite(seed, cfg.features);
  SegmentConfig seg;
  seg.features = cfg.features;
  return run_experiment(suite.queries, segment_suite(suite, seg), suite.gold, cfg);
}

}  // namespace shapedl::synth
