#pragma once

// Region feature extraction: Fourier shape descriptors, invariant shape
// similarity, orientation phases, palette color, Gabor texture, and the
// smoothing function that turns distances into similarities.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapedl/geometry.hpp"

namespace shapedl {

struct FeatureConfig {
  std::size_t boundary_samples = 128;  // Nb
  int coefficients = 16;               // Nc
  std::size_t dense_factor = 4;        // N_dense = dense_factor * Nb
  std::size_t correlation_samples = 720;
};

// ---------------------------------------------------------------------------
// Shape

/// Coefficients Z(k) for k = -nc..nc, stored at index k + nc.
struct FourierDescriptor {
  int nc = 0;
  std::vector<std::complex<double>> coeffs;

  std::complex<double> at(int k) const { return coeffs[static_cast<std::size_t>(k + nc)]; }
  std::size_t length() const { return coeffs.size(); }
};

namespace detail {

inline std::vector<std::complex<double>> truncated_dft(std::span<const Vec2> z, int nc) {
  const std::size_t n = z.size();
  std::vector<std::complex<double>> out(static_cast<std::size_t>(2 * nc + 1));
  for (int k = -nc; k <= nc; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
      acc += std::complex<double>(z[t].x, z[t].y) * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[static_cast<std::size_t>(k + nc)] = acc / static_cast<double>(n);
  }
  return out;
}

}  // namespace detail

/// Two-pass descriptor: DFT of the uniform samples, dense reconstruction from
/// the first 2*nc+1 coefficients, uniform re-interpolation, DFT again.
inline FourierDescriptor fourier_descriptor(const Contour& resampled, int nc,
                                            std::size_t dense_factor = 4) {
  const std::size_t nb = resampled.size();
  if (nc < 1) throw GeometryError("fourier_descriptor needs nc >= 1");
  if (nb < static_cast<std::size_t>(2 * nc + 2))
    throw GeometryError("fourier_descriptor needs at least 2*nc+2 boundary points, got " +
                        std::to_string(nb));
  const auto first = detail::truncated_dft(resampled.points(), nc);

  const std::size_t nd = dense_factor * nb;
  std::vector<Vec2> dense(nd);
  for (std::size_t u = 0; u < nd; ++u) {
    std::complex<double> z{0.0, 0.0};
    for (int k = -nc; k <= nc; ++k) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(u) /
                         static_cast<double>(nd);
      z += first[static_cast<std::size_t>(k + nc)] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    dense[u] = {z.real(), z.imag()};
  }
  const auto uniform = resample_points(dense, nb);
  return FourierDescriptor{nc, detail::truncated_dft(uniform, nc)};
}

inline FourierDescriptor shape_descriptor(const Contour& c, const FeatureConfig& cfg = {}) {
  return fourier_descriptor(resample_uniform(c, cfg.boundary_samples), cfg.coefficients,
                            cfg.dense_factor);
}

/// Translation, scale, rotation and start-point invariant similarity in [0, 1]:
/// cosine of the non-DC magnitude vectors normalized by |Z(1)|.
inline double sim_ss(const FourierDescriptor& a, const FourierDescriptor& b) {
  if (a.nc != b.nc || a.length() != b.length())
    throw GeometryError("sim_ss needs descriptors with equal nc");
  const double na1 = std::abs(a.at(1)), nb1 = std::abs(b.at(1));
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (int k = -a.nc; k <= a.nc; ++k) {
    if (k == 0) continue;
    const double x = std::abs(a.at(k)) / (na1 > 0.0 ? na1 : 1.0);
    const double y = std::abs(b.at(k)) / (nb1 > 0.0 ? nb1 : 1.0);
    xy += x * y;
    xx += x * x;
    yy += y * y;
  }
  if (!(xx > 0.0) || !(yy > 0.0)) throw GeometryError("sim_ss of zero-energy descriptor");
  return std::clamp(xy / std::sqrt(xx * yy), 0.0, 1.0);
}

struct OrientationInfo {
  std::vector<double> phases;  // radians, strongest correlation first
  bool is_circularly_symmetric = false;
};

/// Rotations taking the reference shape onto the region, read off the maxima
/// of the cross-correlation of the two descriptors over start-point shifts.
inline OrientationInfo orientation_info(const FourierDescriptor& region,
                                        const FourierDescriptor& reference,
                                        double symmetry_maxima_threshold = 0.10,
                                        double circular_symmetry_threshold = 0.99,
                                        std::size_t samples = 720) {
  if (region.nc != reference.nc) throw GeometryError("orientation_info needs equal nc");
  const int nc = region.nc;
  std::vector<std::complex<double>> prod;
  std::vector<int> ks;
  for (int k = -nc; k <= nc; ++k) {
    if (k == 0) continue;
    prod.push_back(region.at(k) * std::conj(reference.at(k)));
    ks.push_back(k);
  }
  const double norm_factor = 1.0 / static_cast<double>(2 * nc + 1);
  auto corr = [&](double t) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < prod.size(); ++i) {
      const double ang = 2.0 * std::numbers::pi * ks[i] * t / static_cast<double>(samples);
      acc += prod[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    return acc * norm_factor;
  };

  std::vector<double> mag(samples);
  double hi = 0.0, lo = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < samples; ++t) {
    mag[t] = std::abs(corr(static_cast<double>(t)));
    hi = std::max(hi, mag[t]);
    lo = std::min(lo, mag[t]);
  }
  OrientationInfo info;
  if (!(hi > 0.0)) {
    info.is_circularly_symmetric = true;
    info.phases.push_back(0.0);
    return info;
  }
  info.is_circularly_symmetric = lo / hi >= circular_symmetry_threshold;
  if (info.is_circularly_symmetric) {
    const auto best = std::max_element(mag.begin(), mag.end()) - mag.begin();
    info.phases.push_back(std::arg(corr(static_cast<double>(best))));
    return info;
  }

  struct Peak {
    double value;
    double phase;
  };
  std::vector<Peak> peaks;
  // The k = 1 term dominates |C|, so maxima are compared over the profile's
  // dynamic range rather than against the raw peak height.
  const double floor_value = hi - symmetry_maxima_threshold * (hi - lo);
  for (std::size_t t = 0; t < samples; ++t) {
    const double prev = mag[(t + samples - 1) % samples], next = mag[(t + 1) % samples];
    if (!(mag[t] >= prev && mag[t] > next) || mag[t] < floor_value) continue;
    // Parabolic refinement of the peak position, then read the phase there.
    const double denom = prev - 2.0 * mag[t] + next;
    double offset = denom < 0.0 ? 0.5 * (prev - next) / denom : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    const auto c = corr(static_cast<double>(t) + offset);
    peaks.push_back({std::abs(c), std::arg(c)});
  }
  if (peaks.empty()) {
    const auto best = std::max_element(mag.begin(), mag.end()) - mag.begin();
    peaks.push_back({hi, std::arg(corr(static_cast<double>(best)))});
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.value > b.value; });
  for (const Peak& p : peaks) info.phases.push_back(p.phase);
  return info;
}

// ---------------------------------------------------------------------------
// Color

struct ColorRGB {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  void validate() const {
    for (double v : {r, g, b})
      if (!(v >= 0.0 && v <= 255.0)) throw Error("color component outside [0,255]");
  }
  friend bool operator==(const ColorRGB&, const ColorRGB&) = default;
};

inline double color_distance(const ColorRGB& a, const ColorRGB& b) {
  return std::sqrt((a.r - b.r) * (a.r - b.r) + (a.g - b.g) * (a.g - b.g) + (a.b - b.b) * (a.b - b.b));
}

namespace detail {

inline ColorRGB hsv_to_rgb(double h_deg, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h_deg / 60.0, 6.0);
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {255.0 * (r + m), 255.0 * (g + m), 255.0 * (b + m)};
}

}  // namespace detail

inline constexpr std::size_t kPaletteSize = 112;

/// 7 hues x 4 saturations x 4 values, HSV bin representatives in RGB.
inline const std::array<ColorRGB, kPaletteSize>& palette() {
  static const std::array<ColorRGB, kPaletteSize> table = [] {
    std::array<ColorRGB, kPaletteSize> t{};
    std::size_t i = 0;
    for (int h = 0; h < 7; ++h)
      for (int s = 0; s < 4; ++s)
        for (int v = 0; v < 4; ++v)
          t[i++] = detail::hsv_to_rgb(360.0 * h / 7.0, s / 3.0, v / 3.0);
    return t;
  }();
  return table;
}

inline std::size_t palette_index(const ColorRGB& c) {
  const auto& pal = palette();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pal.size(); ++i) {
    const double d = color_distance(c, pal[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline ColorRGB snap_to_palette(const ColorRGB& c) { return palette()[palette_index(c)]; }

/// Per-channel mean after snapping every pixel to the palette.
inline ColorRGB mean_color(std::span<const ColorRGB> pixels) {
  if (pixels.empty()) throw Error("mean_color of empty region");
  double r = 0, g = 0, b = 0;
  for (const ColorRGB& p : pixels) {
    const ColorRGB q = snap_to_palette(p);
    r += q.r;
    g += q.g;
    b += q.b;
  }
  const double n = static_cast<double>(pixels.size());
  return {r / n, g / n, b / n};
}

// ---------------------------------------------------------------------------
// Texture

inline constexpr std::size_t kTextureLength = 24;
using TextureVec = std::array<double, kTextureLength>;

inline constexpr int kGaborOrientations = 6;
inline constexpr int kGaborScales = 4;

/// Wavelengths 4, 8, 16, 32 px; sigma = 0.56 * wavelength.
inline double gabor_wavelength(int scale) { return 4.0 * std::pow(2.0, scale); }
inline double gabor_sigma(int scale) { return 0.56 * gabor_wavelength(scale); }

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Magnitude responses of the 24-filter bank over a whole image, each map row-major.
struct GaborResponses {
  int width = 0;
  int height = 0;
  std::vector<std::vector<double>> maps;  // index scale * orientations + orientation
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Smallest size >= n with no prime factors above 7.
inline int fft_friendly(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int f : {2, 3, 5, 7})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

inline double signed_frequency(int k, int n) {
  return (k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k - n)) / static_cast<double>(n);
}

}  // namespace detail

/// Filters in the frequency domain: a Gaussian of width 1/(2 pi sigma) centred on
/// (U, V) = (cos t, sin t) / wavelength, with its DC response removed so flat
/// intensity gives zero. The image is padded by edge replication.
inline GaborResponses gabor_responses(const GrayImage& img) {
  if (img.width < 1 || img.height < 1) throw Error("gabor_responses of empty image");
  const int pad = static_cast<int>(std::ceil(3.0 * gabor_sigma(kGaborScales - 1)));
  const int w = detail::fft_friendly(img.width + 2 * pad), h = detail::fft_friendly(img.height + 2 * pad);
  const std::size_t n = static_cast<std::size_t>(w) * h;

  auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  auto* work = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd = fftw_plan_dft_2d(h, w, in, spec, FFTW_FORWARD, FFTW_ESTIMATE);
    inv = fftw_plan_dft_2d(h, w, work, in, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (int y = 0; y < h; ++y) {
    const int sy = std::clamp(y - pad, 0, img.height - 1);
    for (int x = 0; x < w; ++x) {
      const int sx = std::clamp(x - pad, 0, img.width - 1);
      in[static_cast<std::size_t>(y) * w + x][0] = img.at(sx, sy);
      in[static_cast<std::size_t>(y) * w + x][1] = 0.0;
    }
  }
  fftw_execute(fwd);

  GaborResponses out;
  out.width = img.width;
  out.height = img.height;
  out.maps.reserve(kTextureLength);
  const double pi2 = 2.0 * std::numbers::pi * std::numbers::pi;
  for (int sc = 0; sc < kGaborScales; ++sc) {
    const double lambda = gabor_wavelength(sc), sigma = gabor_sigma(sc);
    const double k = pi2 * sigma * sigma;
    for (int o = 0; o < kGaborOrientations; ++o) {
      const double t = std::numbers::pi * o / kGaborOrientations;
      const double u0 = std::cos(t) / lambda, v0 = std::sin(t) / lambda;
      const double dc = std::exp(-k * (u0 * u0 + v0 * v0));
      // Both Gaussians separate into row and column factors.
      std::vector<double> gx(w), gx0(w), gy(h), gy0(h);
      for (int x = 0; x < w; ++x) {
        const double fx = detail::signed_frequency(x, w);
        gx[x] = std::exp(-k * (fx - u0) * (fx - u0));
        gx0[x] = std::exp(-k * fx * fx);
      }
      for (int y = 0; y < h; ++y) {
        const double fy = detail::signed_frequency(y, h);
        gy[y] = std::exp(-k * (fy - v0) * (fy - v0));
        gy0[y] = dc * std::exp(-k * fy * fy);
      }
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double g = gy[y] * gx[x] - gy0[y] * gx0[x];
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          work[i][0] = spec[i][0] * g;
          work[i][1] = spec[i][1] * g;
        }
      }
      fftw_execute(inv);
      std::vector<double> map(static_cast<std::size_t>(img.width) * img.height);
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const std::size_t i = static_cast<std::size_t>(y + pad) * w + (x + pad);
          map[static_cast<std::size_t>(y) * img.width + x] =
              std::hypot(in[i][0], in[i][1]) / static_cast<double>(n);
        }
      out.maps.push_back(std::move(map));
    }
  }
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  fftw_free(in);
  fftw_free(spec);
  fftw_free(work);
  return out;
}

struct TextureResult {
  TextureVec values{};
  bool undersized = false;  // region smaller than the smallest filter support
};

/// Smallest filter support: a (2*ceil(sigma)+1)^2 window at the finest scale.
inline std::size_t min_texture_area() {
  const int r = static_cast<int>(std::ceil(gabor_sigma(0)));
  return static_cast<std::size_t>((2 * r + 1) * (2 * r + 1));
}

/// Mean response magnitude of each filter over the masked pixels.
inline TextureResult gabor_texture(const GaborResponses& responses, std::span<const std::uint8_t> mask) {
  TextureResult out;
  std::size_t count = 0;
  for (std::uint8_t m : mask) count += m ? 1 : 0;
  if (count < min_texture_area()) {
    out.undersized = true;
    return out;
  }
  for (std::size_t f = 0; f < responses.maps.size() && f < kTextureLength; ++f) {
    double sum = 0.0;
    const auto& map = responses.maps[f];
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) sum += map[i];
    out.values[f] = sum / static_cast<double>(count);
  }
  return out;
}

/// Texture of one region alone: the region's bounding box is filtered with
/// every outside pixel replaced by the region's mean intensity, so edges
/// against neighbours do not register as texture.
inline TextureResult region_texture(const GrayImage& img, std::span<const std::uint8_t> mask) {
  if (mask.size() != img.values.size()) throw Error("texture mask does not match image size");
  int x0 = img.width, x1 = -1, y0 = img.height, y1 = -1;
  std::size_t count = 0;
  double sum = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      if (!mask[i]) continue;
      ++count;
      sum += img.values[i];
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (count < min_texture_area()) return TextureResult{{}, true};
  const double mean = sum / static_cast<double>(count);
  GrayImage crop{x1 - x0 + 1, y1 - y0 + 1, {}};
  std::vector<std::uint8_t> crop_mask(static_cast<std::size_t>(crop.width) * crop.height);
  crop.values.resize(crop_mask.size());
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      const std::size_t j = static_cast<std::size_t>(y - y0) * crop.width + (x - x0);
      crop_mask[j] = mask[i] ? 1 : 0;
      crop.values[j] = mask[i] ? img.values[i] : mean;
    }
  return gabor_texture(gabor_responses(crop), crop_mask);
}

inline TextureResult gabor_texture(const GrayImage& img, std::span<const std::uint8_t> mask) {
  if (mask.size() != img.values.size()) throw Error("texture mask does not match image size");
  std::size_t count = 0;
  for (std::uint8_t m : mask) count += m ? 1 : 0;
  if (count < min_texture_area()) return TextureResult{{}, true};
  return gabor_texture(gabor_responses(img), mask);
}

// ---------------------------------------------------------------------------
// Smoothing

/// Maps a distance x >= 0 to a similarity in (fy/2, 1]; phi(0) = 1, phi(fx) = fy.
inline double phi(double x, double fx, double fy) {
  if (!(x >= 0.0) || !(fx > 0.0) || !(fy > 0.0 && fy < 1.0))
    throw Error("phi parameter out of range");
  if (x < fx) return fy + (1.0 - fy) * std::cos(std::numbers::pi * x / (2.0 * fx));
  return fy * (1.0 - std::atan(x * (x - fx) * (1.0 - fy) / (fx * fy)) / std::numbers::pi);
}

}  // namespace shapedl
