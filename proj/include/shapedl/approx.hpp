#pragma once

// Approximate recognition: score injective component-to-region mappings by
// six weighted similarities (spatial, shape, color, rotation, scale, texture)
// and keep the best mapping per image.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "shapedl/config.hpp"
#include "shapedl/features.hpp"
#include "shapedl/geometry.hpp"
#include "shapedl/model.hpp"

namespace shapedl {

using Mapping = std::vector<std::size_t>;

struct FeatureSims {
  double spatial = 1.0;
  double shape = 1.0;
  double color = 1.0;
  double rotation = 1.0;
  double scale = 1.0;
  double texture = 1.0;

  std::array<double, kFeatureCount> as_array() const {
    return {spatial, shape, color, rotation, scale, texture};
  }
};

struct PoseDeltas {
  double spatial = 0.0;   // degrees
  double rotation = 0.0;  // degrees
  double scale = 0.0;
};

struct MatchResult {
  Mapping mapping;
  double score = 0.0;
  FeatureSims breakdown;
  PoseDeltas deltas;
};

inline double weighted_score(const FeatureSims& sims, const Weights& w) {
  const auto s = sims.as_array();
  const auto ws = w.as_array();
  double total = 0.0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) total += ws[i] * s[i];
  return total;
}

namespace detail {

// Circular difference of two angles given in degrees, in [0, 180].
inline double circular_degrees(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

// Counter-clockwise angle from u to w in degrees, or nullopt for a zero vector.
inline std::optional<double> ccw_angle(Vec2 u, Vec2 w) {
  if (norm(u) == 0.0 || norm(w) == 0.0) return std::nullopt;
  return to_degrees(std::atan2(cross(u, w), dot(u, w)));
}

}  // namespace detail

/// Cached per-(description, image) quantities shared by every mapping.
class MatchContext {
 public:
  MatchContext(const CompositeDescription& d, const SegmentedImage& img, const MatchConfig& cfg)
      : d_(d), img_(img), cfg_(cfg), sim_(d.size() * img.size(), -1.0),
        orient_(d.size() * img.size()) {}

  const CompositeDescription& description() const { return d_; }
  const SegmentedImage& image() const { return img_; }
  const MatchConfig& config() const { return cfg_; }

  double shape_similarity(std::size_t k, std::size_t j) {
    double& v = sim_[k * img_.size() + j];
    if (v < 0.0) v = sim_ss(d_.components[k].shape.descriptor(), img_.regions[j].descriptor());
    return v;
  }

  const OrientationInfo& orientation(std::size_t k, std::size_t j) {
    auto& slot = orient_[k * img_.size() + j];
    if (!slot)
      slot = orientation_info(img_.regions[j].descriptor(), d_.components[k].shape.descriptor(),
                              cfg_.symmetry_maxima_threshold, cfg_.circular_symmetry_threshold,
                              cfg_.features.correlation_samples);
    return *slot;
  }

 private:
  const CompositeDescription& d_;
  const SegmentedImage& img_;
  const MatchConfig& cfg_;
  std::vector<double> sim_;
  std::vector<std::optional<OrientationInfo>> orient_;
};

/// Per component: regions passing the descriptor threshold, or failing that the
/// best few by sim_ss. Injective assignments in lexicographic order, capped.
inline std::vector<Mapping> candidate_mappings(MatchContext& ctx) {
  const auto& d = ctx.description();
  const auto& img = ctx.image();
  const auto& cfg = ctx.config();
  const std::size_t n = d.size(), m = img.size();
  std::vector<Mapping> out;
  if (n == 0 || m < n) return out;

  std::vector<std::vector<std::size_t>> cand(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < m; ++j)
      if (ctx.shape_similarity(k, j) >= cfg.fourier_descriptors_threshold) cand[k].push_back(j);
    if (cand[k].empty()) {
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ctx.shape_similarity(k, a) > ctx.shape_similarity(k, b);
      });
      order.resize(std::min(m, std::max<std::size_t>(1, cfg.relaxed_candidates)));
      std::sort(order.begin(), order.end());
      cand[k] = std::move(order);
    }
  }

  Mapping cur(n);
  std::vector<char> used(m, 0);
  auto dfs = [&](auto&& self, std::size_t k) -> void {
    if (out.size() >= cfg.mapping_cap) return;
    if (k == n) {
      out.push_back(cur);
      return;
    }
    for (std::size_t j : cand[k]) {
      if (used[j]) continue;
      used[j] = 1;
      cur[k] = j;
      self(self, k + 1);
      used[j] = 0;
      if (out.size() >= cfg.mapping_cap) return;
    }
  };
  dfs(dfs, 0);
  return out;
}

inline std::vector<Mapping> candidate_mappings(const CompositeDescription& d, const SegmentedImage& img,
                                               const MatchConfig& cfg = {}) {
  MatchContext ctx(d, img, cfg);
  return candidate_mappings(ctx);
}

/// Worst change, over components, of the angles under which pairs of other
/// components are seen from it. Zero for two or fewer components.
inline double delta_spatial(const CompositeDescription& d, const SegmentedImage& img, const Mapping& j) {
  const std::size_t n = d.size();
  if (n <= 2) return 0.0;
  std::vector<Vec2> p(n), v(n);
  for (std::size_t k = 0; k < n; ++k) {
    p[k] = d.components[k].placed_centroid();
    v[k] = img.regions[j[k]].centroid();
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = i + 1; h < n; ++h) {
        if (i == k || h == k) continue;
        const auto a = detail::ccw_angle(p[i] - p[k], p[h] - p[k]);
        const auto b = detail::ccw_angle(v[i] - v[k], v[h] - v[k]);
        if (!a || !b) continue;
        worst = std::max(worst, detail::circular_degrees(*a, *b));
      }
  return worst;
}

/// Worst change, over components, of the bearing of every other component
/// relative to the component's own orientation. Symmetric orientations take
/// the best phase; circularly symmetric regions contribute nothing.
inline double delta_rotation(MatchContext& ctx, const Mapping& j) {
  const auto& d = ctx.description();
  const auto& img = ctx.image();
  const std::size_t n = d.size();
  if (n <= 1) return 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const OrientationInfo& info = ctx.orientation(k, j[k]);
    if (info.is_circularly_symmetric) continue;
    const Vec2 pk = d.components[k].placed_centroid(), vk = img.regions[j[k]].centroid();
    const double heading = to_degrees(d.components[k].transform.theta);
    double best = std::numeric_limits<double>::infinity();
    for (double phase : info.phases) {
      double local = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == k) continue;
        const Vec2 dp = d.components[i].placed_centroid() - pk, dv = img.regions[j[i]].centroid() - vk;
        if (norm(dp) == 0.0 || norm(dv) == 0.0) continue;
        const double gamma = to_degrees(angle_of(dp)) - heading;
        const double delta = to_degrees(angle_of(dv)) - to_degrees(phase);
        local = std::max(local, detail::circular_degrees(gamma, delta));
      }
      best = std::min(best, local);
    }
    if (std::isfinite(best)) worst = std::max(worst, best);
  }
  return worst;
}

inline double delta_rotation(const CompositeDescription& d, const SegmentedImage& img, const Mapping& j,
                             const MatchConfig& cfg = {}) {
  MatchContext ctx(d, img, cfg);
  return delta_rotation(ctx, j);
}

/// Worst disagreement, over component pairs, between size-to-distance ratios
/// in the description and in the image.
inline double delta_scale(const CompositeDescription& d, const SegmentedImage& img, const Mapping& j) {
  const std::size_t n = d.size();
  if (n <= 1) return 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double m_size = d.components[k].placed_size();
    const double big_m = img.regions[j[k]].size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double dist_d = distance(d.components[k].placed_centroid(), d.components[i].placed_centroid());
      const double dist_img = distance(img.regions[j[k]].centroid(), img.regions[j[i]].centroid());
      if (dist_d == 0.0 || dist_img == 0.0) continue;
      const double a = big_m / dist_img, b = m_size / dist_d;
      worst = std::max(worst, std::abs(1.0 - std::min(a, b) / std::max(a, b)));
    }
  }
  return worst;
}

/// Mean over bands of |a - b| / scale.
inline double texture_difference(const TextureVec& a, const TextureVec& b, const TextureVec& scale) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kTextureLength; ++i) sum += std::abs(a[i] - b[i]) / scale[i];
  return sum / static_cast<double>(kTextureLength);
}

struct AppearanceDeltas {
  double shape = 0.0;  // max of 1 - sim_ss
  double color = 0.0;  // max RGB distance
  double texture = 0.0;
};

inline AppearanceDeltas appearance_deltas(MatchContext& ctx, const Mapping& j) {
  const auto& d = ctx.description();
  const auto& img = ctx.image();
  AppearanceDeltas out;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const ShapeComponent& c = d.components[k];
    const Region& r = img.regions[j[k]];
    out.shape = std::max(out.shape, 1.0 - ctx.shape_similarity(k, j[k]));
    if (c.color && r.color()) out.color = std::max(out.color, color_distance(*c.color, *r.color()));
    if (c.texture && r.texture())
      out.texture = std::max(out.texture, texture_difference(*c.texture, *r.texture(), ctx.config().texture_scale));
  }
  return out;
}

namespace detail {

inline double smooth(double x, const MatchConfig& cfg, Feature f) {
  return phi(x, cfg[f].fx, cfg[f].fy);
}

// Scores one mapping; nullopt when its spatial similarity falls below the
// spatial threshold.
inline std::optional<MatchResult> score_gated(MatchContext& ctx, const Mapping& j, bool gate) {
  const auto& cfg = ctx.config();
  MatchResult res;
  res.mapping = j;
  res.deltas.spatial = delta_spatial(ctx.description(), ctx.image(), j);
  res.breakdown.spatial = smooth(res.deltas.spatial, cfg, Feature::Spatial);
  if (gate && res.breakdown.spatial < cfg.spatial_similarity_threshold) return std::nullopt;
  res.deltas.rotation = delta_rotation(ctx, j);
  res.deltas.scale = delta_scale(ctx.description(), ctx.image(), j);
  const AppearanceDeltas a = appearance_deltas(ctx, j);
  res.breakdown.shape = smooth(a.shape, cfg, Feature::Shape);
  res.breakdown.color = smooth(a.color, cfg, Feature::Color);
  res.breakdown.rotation = smooth(res.deltas.rotation, cfg, Feature::Rotation);
  res.breakdown.scale = smooth(res.deltas.scale, cfg, Feature::Scale);
  res.breakdown.texture = smooth(a.texture, cfg, Feature::Texture);
  // Every component carries the group's worst similarities, so the minimum
  // over components equals this one weighted sum.
  res.score = weighted_score(res.breakdown, cfg.weights);
  return res;
}

}  // namespace detail

inline FeatureSims group_feature_sims(const CompositeDescription& d, const SegmentedImage& img, const Mapping& j,
                                      const MatchConfig& cfg = {}) {
  MatchContext ctx(d, img, cfg);
  return detail::score_gated(ctx, j, false)->breakdown;
}

inline MatchResult score_mapping(const CompositeDescription& d, const SegmentedImage& img, const Mapping& j,
                                 const MatchConfig& cfg = {}) {
  MatchContext ctx(d, img, cfg);
  return *detail::score_gated(ctx, j, false);
}

/// Highest-scoring admissible mapping, before the global threshold. Ties keep
/// the lexicographically smallest mapping.
inline std::optional<MatchResult> best_mapping(const CompositeDescription& d, const SegmentedImage& img,
                                               const MatchConfig& cfg = {}) {
  MatchContext ctx(d, img, cfg);
  std::optional<MatchResult> best;
  for (const Mapping& j : candidate_mappings(ctx)) {
    auto r = detail::score_gated(ctx, j, true);
    if (r && (!best || r->score > best->score)) best = std::move(r);
  }
  return best;
}

inline std::optional<MatchResult> recognize_approx(const CompositeDescription& d, const SegmentedImage& img,
                                                   const MatchConfig& cfg = {}) {
  auto best = best_mapping(d, img, cfg);
  if (!best || best->score < cfg.global_similarity_threshold) return std::nullopt;
  return best;
}

struct RankedImage {
  std::string image_id;
  MatchResult match;
};

/// Sort order for result lists: score descending, then image id.
inline bool ranked_before(const RankedImage& a, const RankedImage& b) {
  if (a.match.score != b.match.score) return a.match.score > b.match.score;
  return a.image_id < b.image_id;
}

template <class Images>
std::vector<RankedImage> retrieve(const CompositeDescription& d, const Images& images, const MatchConfig& cfg = {}) {
  std::vector<RankedImage> out;
  for (const SegmentedImage& img : images)
    if (auto r = recognize_approx(d, img, cfg)) out.push_back({img.id, std::move(*r)});
  std::sort(out.begin(), out.end(), ranked_before);
  return out;
}

/// Per-band standard deviation of region textures across a collection, for
/// use as MatchConfig::texture_scale. Bands with no spread keep scale 1.
template <class Images>
TextureVec texture_scales(const Images& images) {
  TextureVec mean{}, sq{}, out;
  std::size_t count = 0;
  for (const SegmentedImage& img : images)
    for (const Region& r : img.regions) {
      if (!r.texture()) continue;
      ++count;
      for (std::size_t i = 0; i < kTextureLength; ++i) {
        mean[i] += (*r.texture())[i];
        sq[i] += (*r.texture())[i] * (*r.texture())[i];
      }
    }
  for (std::size_t i = 0; i < kTextureLength; ++i) {
    out[i] = 1.0;
    if (count < 2) continue;
    const double mu = mean[i] / static_cast<double>(count);
    const double var = sq[i] / static_cast<double>(count) - mu * mu;
    if (var > 1e-12) out[i] = std::sqrt(var);
  }
  return out;
}

}  // namespace shapedl
