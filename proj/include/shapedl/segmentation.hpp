#pragma once

// Synthetic segmenter: palette-quantized connected components, background
// removal by border color, outer boundary tracing, per-region features.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shapedl/features.hpp"
#include "shapedl/geometry.hpp"
#include "shapedl/model.hpp"
#include "shapedl/raster.hpp"

namespace shapedl {

struct SegmentConfig {
  std::size_t min_area = 50;
  double simplify_tolerance = 0.5;
  bool compute_texture = true;
  FeatureConfig features;
};

/// One connected component: its pixel indices into the raster.
struct PixelRegion {
  std::size_t palette_index = 0;
  std::vector<std::size_t> pixels;
};

struct Labeling {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // -1 for background
  std::vector<PixelRegion> regions;
  std::size_t background_index = 0;
};

/// Most frequent palette index along the border; ties go to the lower index.
inline std::size_t border_background(const RasterImage& img, const std::vector<std::uint8_t>& quant) {
  std::array<std::size_t, kPaletteSize> counts{};
  auto add = [&](int x, int y) { ++counts[quant[static_cast<std::size_t>(y) * img.width + x]]; };
  for (int x = 0; x < img.width; ++x) {
    add(x, 0);
    if (img.height > 1) add(x, img.height - 1);
  }
  for (int y = 1; y + 1 < img.height; ++y) {
    add(0, y);
    if (img.width > 1) add(img.width - 1, y);
  }
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

/// 4-connected components over palette indices, background and small
/// components removed. Regions are ordered by first pixel in raster order.
inline Labeling label_components(const RasterImage& img, std::size_t min_area) {
  const std::size_t total = img.pixel_count();
  std::vector<std::uint8_t> quant(total);
  std::map<std::array<std::uint8_t, 3>, std::uint8_t> memo;
  for (std::size_t i = 0; i < total; ++i) {
    const std::array<std::uint8_t, 3> key{img.rgb[3 * i], img.rgb[3 * i + 1], img.rgb[3 * i + 2]};
    auto it = memo.find(key);
    if (it == memo.end())
      it = memo.emplace(key, static_cast<std::uint8_t>(palette_index({double(key[0]), double(key[1]), double(key[2])})))
               .first;
    quant[i] = it->second;
  }
  Labeling out;
  out.width = img.width;
  out.height = img.height;
  out.background_index = border_background(img, quant);
  out.labels.assign(total, -1);
  std::vector<char> seen(total, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < total; ++start) {
    if (seen[start]) continue;
    const std::uint8_t q = quant[start];
    PixelRegion comp{q, {}};
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      comp.pixels.push_back(p);
      const int x = static_cast<int>(p % img.width), y = static_cast<int>(p / img.width);
      const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= img.width || ny[k] >= img.height) continue;
        const std::size_t np = static_cast<std::size_t>(ny[k]) * img.width + nx[k];
        if (!seen[np] && quant[np] == q) {
          seen[np] = 1;
          stack.push_back(np);
        }
      }
    }
    if (q == out.background_index || comp.pixels.size() < min_area) continue;
    std::sort(comp.pixels.begin(), comp.pixels.end());
    const int label = static_cast<int>(out.regions.size());
    for (std::size_t p : comp.pixels) out.labels[p] = label;
    out.regions.push_back(std::move(comp));
  }
  return out;
}

/// Outer boundary of a 4-connected pixel set, as a polygon through pixel
/// corners. Walks cracks between pixels with the region on the right,
/// preferring right turns, so diagonal contacts are not crossed.
inline std::vector<Vec2> trace_outer_boundary(const std::vector<int>& labels, int width, int height, int label,
                                              std::size_t first_pixel) {
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < width && y < height && labels[static_cast<std::size_t>(y) * width + x] == label;
  };
  // The first pixel in raster order has an exposed top edge; start at its
  // top-left corner heading east.
  const int sx = static_cast<int>(first_pixel % width), sy = static_cast<int>(first_pixel / width);
  int x = sx, y = sy, dx = 1, dy = 0;
  std::vector<Vec2> poly;
  const std::size_t guard = 4 * static_cast<std::size_t>(width + 1) * (height + 1);
  for (std::size_t steps = 0; steps < guard; ++steps) {
    x += dx;
    y += dy;
    // Pixels ahead of the corner, to the right and left of the heading.
    int rx, ry, lx, ly;
    if (dx == 1) { rx = x; ry = y; lx = x; ly = y - 1; }
    else if (dy == 1) { rx = x - 1; ry = y; lx = x; ly = y; }
    else if (dx == -1) { rx = x - 1; ry = y - 1; lx = x - 1; ly = y; }
    else { rx = x; ry = y - 1; lx = x - 1; ly = y - 1; }
    int ndx = dx, ndy = dy;
    if (!inside(rx, ry)) {
      ndx = -dy;
      ndy = dx;
    } else if (inside(lx, ly)) {
      ndx = dy;
      ndy = -dx;
    }
    if (ndx != dx || ndy != dy) poly.push_back({double(x), double(y)});
    dx = ndx;
    dy = ndy;
    if (x == sx && y == sy && dx == 1 && dy == 0) return poly;
  }
  throw GeometryError("boundary trace did not close");
}

namespace detail {

inline void douglas_peucker(const std::vector<Vec2>& pts, std::size_t a, std::size_t b, double tol,
                            std::vector<char>& keep) {
  if (b <= a + 1) return;
  double worst = -1.0;
  std::size_t at = a;
  for (std::size_t i = a + 1; i < b; ++i) {
    const double d = point_segment_distance(pts[i], pts[a], pts[b]);
    if (d > worst) {
      worst = d;
      at = i;
    }
  }
  if (worst <= tol) return;
  keep[at] = 1;
  douglas_peucker(pts, a, at, tol, keep);
  douglas_peucker(pts, at, b, tol, keep);
}

}  // namespace detail

/// Closed-polyline simplification: split at the vertex farthest from the
/// first, then simplify both chains.
inline std::vector<Vec2> simplify_closed(const std::vector<Vec2>& poly, double tol) {
  const std::size_t n = poly.size();
  if (n <= 4 || tol <= 0.0) return poly;
  std::size_t far = 0;
  double far_d = -1.0;
  for (std::size_t i = 1; i < n; ++i)
    if (distance(poly[i], poly[0]) > far_d) {
      far_d = distance(poly[i], poly[0]);
      far = i;
    }
  std::vector<Vec2> ring(poly);
  ring.push_back(poly[0]);
  std::vector<char> keep(n + 1, 0);
  keep[0] = keep[far] = keep[n] = 1;
  detail::douglas_peucker(ring, 0, far, tol, keep);
  detail::douglas_peucker(ring, far, n, tol, keep);
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(poly[i]);
  return out;
}

/// Color, texture and geometry for one labeled component. The contour is
/// supplied by the caller.
inline Region extract_region_features(const PixelRegion& pix, const Contour& contour, const RasterImage& raster,
                                      const GrayImage* gray, const FeatureConfig& cfg = {}) {
  std::vector<ColorRGB> colors;
  colors.reserve(pix.pixels.size());
  for (std::size_t p : pix.pixels)
    colors.push_back(raster.at(static_cast<int>(p % raster.width), static_cast<int>(p / raster.width)));
  const ColorRGB color = mean_color(colors);
  std::optional<TextureVec> texture;
  if (gray) {
    std::vector<std::uint8_t> mask(raster.pixel_count(), 0);
    for (std::size_t p : pix.pixels) mask[p] = 1;
    texture = region_texture(*gray, mask).values;
  }
  return Region(contour, color, texture, cfg);
}

/// Regions of a flat-colored raster. Throws when nothing but background remains.
inline SegmentedImage segment_synthetic(const RasterImage& img, const std::string& id = "",
                                        const SegmentConfig& cfg = {}) {
  const Labeling lab = label_components(img, cfg.min_area);
  if (lab.regions.empty()) throw LayoutError("image '" + id + "': no regions besides background");

  std::vector<Contour> raw, simple;
  for (std::size_t r = 0; r < lab.regions.size(); ++r) {
    const auto poly = trace_outer_boundary(lab.labels, lab.width, lab.height, static_cast<int>(r),
                                           lab.regions[r].pixels.front());
    raw.emplace_back(poly);
    try {
      simple.emplace_back(simplify_closed(poly, cfg.simplify_tolerance));
    } catch (const GeometryError&) {
      simple.push_back(raw.back());
    }
  }
  // Neighbours simplified independently can cross along a shared edge; the
  // exact pixel boundaries never do.
  for (std::size_t a = 0; a < simple.size(); ++a)
    for (std::size_t b = a + 1; b < simple.size(); ++b)
      if (regions_conflict(simple[a], simple[b])) {
        simple[a] = raw[a];
        simple[b] = raw[b];
      }

  std::optional<GrayImage> gray;
  if (cfg.compute_texture) gray = img.gray();
  SegmentedImage out;
  out.id = id;
  for (std::size_t r = 0; r < lab.regions.size(); ++r)
    out.regions.push_back(extract_region_features(lab.regions[r], simple[r], img,
                                                  gray ? &*gray : nullptr, cfg.features));
  return out;
}

}  // namespace shapedl
