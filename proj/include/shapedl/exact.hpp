#pragma once

// Exact recognition: is there one similarity transform that places every
// component of a description onto a distinct region of an image?

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "shapedl/config.hpp"
#include "shapedl/features.hpp"
#include "shapedl/geometry.hpp"
#include "shapedl/model.hpp"

namespace shapedl {

struct ExactMatch {
  std::vector<std::size_t> mapping;  // component index -> region index
  Transform transform;
};

struct RecognitionStats {
  std::size_t transform_solves = 0;
  std::size_t contour_checks = 0;
};

/// The similarity transform taking p1 -> v1 and p2 -> v2.
inline Transform solve_two_point_transform(Vec2 p1, Vec2 p2, Vec2 v1, Vec2 v2) {
  const Vec2 dp = p2 - p1, dv = v2 - v1;
  const double lp = norm(dp), lv = norm(dv);
  const double scale_ref = std::max({norm(p1), norm(p2), norm(v1), norm(v2), 1.0});
  if (!(lp > 1e-12 * scale_ref) || !(lv > 1e-12 * scale_ref))
    throw GeometryError("degenerate anchor: coincident points");
  Transform t{0.0, 0.0, wrap_angle(angle_of(dv) - angle_of(dp)), lv / lp};
  const Vec2 off = v1 - t.apply_linear(p1);
  t.tx = off.x;
  t.ty = off.y;
  return t;
}

namespace detail {

inline constexpr std::size_t kMatchCoarse = 128;
inline constexpr std::size_t kMatchFine = 512;

struct BoundarySamples {
  std::vector<Vec2> coarse;
  std::vector<Vec2> fine;
  double size = 0.0;
};

inline BoundarySamples boundary_samples(const Contour& c) {
  return {resample_points(c.points(), kMatchCoarse), resample_points(c.points(), kMatchFine),
          shapedl::size(c)};
}

// Mean distance from a's samples to b's, minimized over cyclic alignments.
inline double aligned_mean_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  const std::size_t na = a.size(), nb = b.size(), step = nb / na;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t shift = 0; shift < nb; ++shift) {
    double sum = 0.0;
    for (std::size_t k = 0; k < na && sum < best * static_cast<double>(na); ++k)
      sum += distance(a[k], b[(shift + k * step) % nb]);
    best = std::min(best, sum / static_cast<double>(na));
  }
  return best;
}

inline double symmetric_boundary_distance(const BoundarySamples& a, const BoundarySamples& b) {
  return std::max(aligned_mean_distance(a.coarse, b.fine), aligned_mean_distance(b.coarse, a.fine));
}

}  // namespace detail

/// Contours coincide when their aligned mean boundary distance is at most eps * size(a).
inline bool contour_match(const Contour& a, const Contour& b, double eps) {
  const auto sa = detail::boundary_samples(a), sb = detail::boundary_samples(b);
  return detail::symmetric_boundary_distance(sa, sb) <= eps * sa.size;
}

namespace detail {

// Color within eps of full scale, texture within eps relative. A component
// without color or texture accepts anything; a region without one only
// satisfies components that also leave it open.
inline bool appearance_matches(const ShapeComponent& c, const Region& r, double eps) {
  if (c.color) {
    if (!r.color() || color_distance(*c.color, *r.color()) > eps * 255.0) return false;
  }
  if (c.texture) {
    if (!r.texture()) return false;
    double d2 = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < kTextureLength; ++i) {
      const double a = (*c.texture)[i], b = (*r.texture())[i];
      d2 += (a - b) * (a - b);
      na += a * a;
      nb += b * b;
    }
    if (std::sqrt(d2) > eps * std::max({std::sqrt(na), std::sqrt(nb), 1.0})) return false;
  }
  return true;
}

// Shared per-call state: placed component contours and lazily built samples.
class ExactContext {
 public:
  ExactContext(const CompositeDescription& d, const SegmentedImage& img, double eps)
      : d_(d), img_(img), eps_(eps), region_samples_(img.size()) {}

  const BoundarySamples& region(std::size_t j) {
    if (!region_samples_[j]) region_samples_[j] = boundary_samples(img_.regions[j].contour());
    return *region_samples_[j];
  }

  // Component k placed by tau, compared with region j.
  bool fits(std::size_t k, std::size_t j, const Transform& tau, RecognitionStats& stats) {
    const ShapeComponent& comp = d_.components[k];
    if (!appearance_matches(comp, img_.regions[j], eps_)) return false;
    ++stats.contour_checks;
    const Contour placed = apply_transform(compose(tau, comp.transform), comp.shape.contour());
    const auto ps = boundary_samples(placed);
    return symmetric_boundary_distance(ps, region(j)) <= eps_ * ps.size;
  }

 private:
  const CompositeDescription& d_;
  const SegmentedImage& img_;
  double eps_;
  std::vector<std::optional<BoundarySamples>> region_samples_;
};

// Transforms taking component k onto region j as a lone shape: scale from
// sizes, rotation from each orientation phase, translation from centroids.
inline std::vector<Transform> single_shape_transforms(const ShapeComponent& comp, const Region& r,
                                                      const MatchConfig& cfg) {
  std::vector<Transform> out;
  if (sim_ss(comp.shape.descriptor(), r.descriptor()) < cfg.fourier_descriptors_threshold) return out;
  const auto info = orientation_info(r.descriptor(), comp.shape.descriptor(), cfg.symmetry_maxima_threshold,
                                     cfg.circular_symmetry_threshold, cfg.features.correlation_samples);
  const Transform inv = comp.transform.inverse();
  for (double phase : info.phases) {
    Transform onto{0.0, 0.0, phase, r.size() / comp.shape.size()};
    const Vec2 off = r.centroid() - onto.apply_linear(comp.shape.centroid_offset());
    onto.tx = off.x;
    onto.ty = off.y;
    out.push_back(compose(onto, inv));
  }
  return out;
}

// Completes a partial injective assignment under a fixed tau, components in
// index order, regions tried in index order.
inline bool assign_rest(ExactContext& ctx, const CompositeDescription& d, const SegmentedImage& img,
                        const Transform& tau, double eps, std::vector<std::size_t>& mapping,
                        std::vector<char>& used, std::size_t k, RecognitionStats& stats) {
  if (k == d.size()) return true;
  if (mapping[k] != SIZE_MAX) return assign_rest(ctx, d, img, tau, eps, mapping, used, k + 1, stats);
  const ShapeComponent& comp = d.components[k];
  const Vec2 target = tau.apply(comp.placed_centroid());
  const double tol = eps * tau.s * comp.placed_size();
  for (std::size_t j = 0; j < img.size(); ++j) {
    if (used[j] || distance(img.regions[j].centroid(), target) > tol) continue;
    if (!ctx.fits(k, j, tau, stats)) continue;
    mapping[k] = j;
    used[j] = 1;
    if (assign_rest(ctx, d, img, tau, eps, mapping, used, k + 1, stats)) return true;
    mapping[k] = SIZE_MAX;
    used[j] = 0;
  }
  return false;
}

// First pair of components with distinct placed centroids.
inline std::optional<std::pair<std::size_t, std::size_t>> anchor_components(const CompositeDescription& d) {
  for (std::size_t a = 0; a < d.size(); ++a)
    for (std::size_t b = a + 1; b < d.size(); ++b) {
      const Vec2 pa = d.components[a].placed_centroid(), pb = d.components[b].placed_centroid();
      const double ref = std::max(d.components[a].placed_size(), d.components[b].placed_size());
      if (distance(pa, pb) > 1e-9 * ref) return std::pair{a, b};
    }
  return std::nullopt;
}

}  // namespace detail

/// Searches ordered anchor-region pairs; each pair fixes tau, which is then
/// checked centroid-first and contour-second for every other component.
inline std::optional<ExactMatch> recognize_exact(const CompositeDescription& d, const SegmentedImage& img,
                                                 const MatchConfig& cfg = {},
                                                 RecognitionStats* stats_out = nullptr) {
  RecognitionStats local;
  RecognitionStats& stats = stats_out ? *stats_out : local;
  const double eps = cfg.exact_tolerance;
  const std::size_t n = d.size(), m = img.size();
  if (n == 0 || m < n) return std::nullopt;
  detail::ExactContext ctx(d, img, eps);

  auto try_tau = [&](const Transform& tau, std::vector<std::size_t> mapping) -> std::optional<ExactMatch> {
    std::vector<char> used(m, 0);
    for (std::size_t j : mapping)
      if (j != SIZE_MAX) used[j] = 1;
    if (detail::assign_rest(ctx, d, img, tau, eps, mapping, used, 0, stats))
      return ExactMatch{std::move(mapping), tau};
    return std::nullopt;
  };

  const auto anchors = detail::anchor_components(d);
  if (!anchors) {
    // One component, or all centroids stacked: derive tau from component 0 alone.
    for (std::size_t j = 0; j < m; ++j) {
      for (const Transform& tau : detail::single_shape_transforms(d.components[0], img.regions[j], cfg)) {
        if (!ctx.fits(0, j, tau, stats)) continue;
        std::vector<std::size_t> mapping(n, SIZE_MAX);
        mapping[0] = j;
        if (auto hit = try_tau(tau, std::move(mapping))) return hit;
      }
    }
    return std::nullopt;
  }

  const auto [a1, a2] = *anchors;
  const Vec2 p1 = d.components[a1].placed_centroid(), p2 = d.components[a2].placed_centroid();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t h = 0; h < m; ++h) {
      if (i == h) continue;
      const Vec2 v1 = img.regions[i].centroid(), v2 = img.regions[h].centroid();
      if (!(distance(v1, v2) > 1e-12 * std::max({norm(v1), norm(v2), 1.0}))) continue;
      ++stats.transform_solves;
      const Transform tau = solve_two_point_transform(p1, p2, v1, v2);
      if (!ctx.fits(a1, i, tau, stats) || !ctx.fits(a2, h, tau, stats)) continue;
      std::vector<std::size_t> mapping(n, SIZE_MAX);
      mapping[a1] = i;
      mapping[a2] = h;
      if (auto hit = try_tau(tau, std::move(mapping))) return hit;
    }
  }
  return std::nullopt;
}

/// C subsumes D iff C is recognized in D's prototypical image.
inline bool subsumes(const CompositeDescription& c, const CompositeDescription& d, const MatchConfig& cfg = {}) {
  return recognize_exact(c, prototypical_image(d, cfg.features), cfg).has_value();
}

inline constexpr std::size_t kOracleLimit = 6;

namespace detail {

// Lone-shape transforms found without descriptor phases: for every cyclic
// alignment of uniform samples, the least-squares rotation about the centroids.
inline std::vector<Transform> procrustes_transforms(const ShapeComponent& comp, const Region& r,
                                                    const MatchConfig& cfg) {
  std::vector<Transform> out;
  if (sim_ss(comp.shape.descriptor(), r.descriptor()) < cfg.fourier_descriptors_threshold) return out;
  const Contour placed = comp.placed_contour();
  const Vec2 gp = centroid(placed), gr = r.centroid();
  const auto a = resample_points(placed.points(), kMatchCoarse);
  const auto b = resample_points(r.contour().points(), kMatchCoarse);
  const double s = r.size() / shapedl::size(placed);
  const std::size_t n = a.size();
  for (std::size_t shift = 0; shift < n; ++shift) {
    double re = 0.0, im = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 p = a[k] - gp, q = b[(k + shift) % n] - gr;
      re += dot(p, q);
      im += cross(p, q);
    }
    Transform tau{0.0, 0.0, std::atan2(im, re), s};
    const Vec2 off = gr - tau.apply_linear(gp);
    tau.tx = off.x;
    tau.ty = off.y;
    double resid = 0.0;
    for (std::size_t k = 0; k < n; ++k) resid += distance(tau.apply(a[k]), b[(k + shift) % n]);
    if (resid / static_cast<double>(n) <= 4.0 * cfg.exact_tolerance * r.size()) out.push_back(tau);
  }
  return out;
}

}  // namespace detail

/// Brute force over every injective mapping. Each mapping fixes tau through
/// its anchor components; every component is then checked by contour.
inline std::optional<ExactMatch> recognize_exact_oracle(const CompositeDescription& d, const SegmentedImage& img,
                                                        const MatchConfig& cfg = {}) {
  const std::size_t n = d.size(), m = img.size();
  if (n > kOracleLimit || m > kOracleLimit) throw Error("exact oracle limited to n, m <= 6");
  if (n == 0 || m < n) return std::nullopt;
  const double eps = cfg.exact_tolerance;

  auto all_fit = [&](const std::vector<std::size_t>& j, const Transform& tau) {
    for (std::size_t k = 0; k < n; ++k) {
      const ShapeComponent& comp = d.components[k];
      if (!detail::appearance_matches(comp, img.regions[j[k]], eps)) return false;
      const Contour placed = apply_transform(compose(tau, comp.transform), comp.shape.contour());
      if (!contour_match(placed, img.regions[j[k]].contour(), eps)) return false;
    }
    return true;
  };

  const auto anchors = detail::anchor_components(d);
  std::vector<std::size_t> j(n);
  std::vector<char> used(m, 0);
  std::optional<ExactMatch> found;
  auto visit = [&](auto&& self, std::size_t k) -> void {
    if (found) return;
    if (k == n) {
      std::vector<Transform> taus;
      if (anchors) {
        const auto [a1, a2] = *anchors;
        const Vec2 v1 = img.regions[j[a1]].centroid(), v2 = img.regions[j[a2]].centroid();
        if (distance(v1, v2) == 0.0) return;
        taus.push_back(solve_two_point_transform(d.components[a1].placed_centroid(),
                                                 d.components[a2].placed_centroid(), v1, v2));
      } else {
        taus = detail::procrustes_transforms(d.components[0], img.regions[j[0]], cfg);
      }
      for (const Transform& tau : taus)
        if (all_fit(j, tau)) {
          found = ExactMatch{j, tau};
          return;
        }
      return;
    }
    for (std::size_t r = 0; r < m; ++r) {
      if (used[r]) continue;
      used[r] = 1;
      j[k] = r;
      self(self, k + 1);
      used[r] = 0;
    }
  };
  visit(visit, 0);
  return found;
}

}  // namespace shapedl
