#pragma once

// 24-bit RGB rasters: PPM and PNG codecs and a polygon fill used to draw
// synthetic scenes.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "shapedl/features.hpp"
#include "shapedl/geometry.hpp"

namespace shapedl {

class ParseError : public Error {
 public:
  using Error::Error;
};

struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  RasterImage() = default;
  RasterImage(int w, int h, ColorRGB fill = {255, 255, 255}) : width(w), height(h) {
    if (w < 1 || h < 1) throw Error("raster dimensions must be positive");
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (int i = 0; i < w * h; ++i) set(i % w, i / w, fill);
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  ColorRGB at(int x, int y) const {
    const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
    return {double(rgb[o]), double(rgb[o + 1]), double(rgb[o + 2])};
  }

  void set(int x, int y, ColorRGB c) {
    const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
    auto q = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
    rgb[o] = q(c.r);
    rgb[o + 1] = q(c.g);
    rgb[o + 2] = q(c.b);
  }

  GrayImage gray() const {
    GrayImage g{width, height, std::vector<double>(pixel_count())};
    for (std::size_t i = 0; i < pixel_count(); ++i)
      g.values[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    return g;
  }
};

namespace detail {

inline void skip_pnm_space(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
}

inline long read_pnm_int(const std::string& s, std::size_t& pos) {
  skip_pnm_space(s, pos);
  const std::size_t start = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos == start) throw ParseError("PPM: expected an integer at byte " + std::to_string(start));
  return std::stol(s.substr(start, pos - start));
}

}  // namespace detail

/// Binary (P6) or ASCII (P3) PPM, any maxval up to 65535.
inline RasterImage decode_ppm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '3'))
    throw ParseError("PPM: missing P6/P3 magic");
  const bool binary = bytes[1] == '6';
  std::size_t pos = 2;
  const long w = detail::read_pnm_int(bytes, pos), h = detail::read_pnm_int(bytes, pos);
  const long maxval = detail::read_pnm_int(bytes, pos);
  if (w < 1 || h < 1 || w > 1 << 15 || h > 1 << 15) throw ParseError("PPM: bad dimensions");
  if (maxval < 1 || maxval > 65535) throw ParseError("PPM: bad maxval");
  RasterImage img(static_cast<int>(w), static_cast<int>(h));
  const double scale = 255.0 / static_cast<double>(maxval);
  const std::size_t samples = img.pixel_count() * 3;
  std::vector<double> vals(samples);
  if (binary) {
    ++pos;  // single whitespace byte after maxval
    const std::size_t width_bytes = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + samples * width_bytes) throw ParseError("PPM: truncated pixel data");
    for (std::size_t i = 0; i < samples; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * width_bytes);
      vals[i] = width_bytes == 1 ? p[0] : (p[0] << 8 | p[1]);
    }
  } else {
    for (std::size_t i = 0; i < samples; ++i) vals[i] = static_cast<double>(detail::read_pnm_int(bytes, pos));
  }
  for (std::size_t i = 0; i < samples; ++i) {
    if (vals[i] > maxval) throw ParseError("PPM: sample exceeds maxval");
    img.rgb[i] = static_cast<std::uint8_t>(std::lround(vals[i] * scale));
  }
  return img;
}

inline std::string encode_ppm(const RasterImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

/// Any PNG libpng understands, flattened onto white when it carries alpha.
inline RasterImage decode_png(const std::string& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw ParseError(std::string("PNG: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  if (image.width < 1 || image.height < 1 || image.width > 1u << 15 || image.height > 1u << 15) {
    png_image_free(&image);
    throw ParseError("PNG: bad dimensions");
  }
  RasterImage img(static_cast<int>(image.width), static_cast<int>(image.height));
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&image, &white, img.rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ParseError("PNG: " + msg);
  }
  return img;
}

inline std::string encode_png(const RasterImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.rgb.data(), 0, nullptr))
    throw Error(std::string("PNG encode: ") + image.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.rgb.data(), 0, nullptr))
    throw Error(std::string("PNG encode: ") + image.message);
  out.resize(size);
  return out;
}

/// Sniffs PNG or PPM from the leading bytes.
inline RasterImage decode_raster(const std::string& bytes) {
  static const char png_sig[] = "\x89PNG";
  if (bytes.size() >= 4 && bytes.compare(0, 4, png_sig) == 0) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_ppm(bytes);
  throw ParseError("raster is neither PNG nor PPM");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

/// Paints every pixel whose center lies inside the polygon (even-odd rule).
inline void fill_polygon(RasterImage& img, std::span<const Vec2> poly, ColorRGB color) {
  if (poly.size() < 3) return;
  double y0 = poly[0].y, y1 = poly[0].y;
  for (const Vec2& p : poly) {
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const int row0 = std::max(0, static_cast<int>(std::floor(y0))), row1 = std::min(img.height - 1, static_cast<int>(std::ceil(y1)));
  std::vector<double> xs;
  for (int row = row0; row <= row1; ++row) {
    const double y = row + 0.5;
    xs.clear();
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
      const Vec2 a = poly[i], b = poly[(i + 1) % n];
      if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
      const int c1 = std::min(img.width - 1, static_cast<int>(std::floor(xs[i + 1] - 0.5)));
      for (int col = c0; col <= c1; ++col) img.set(col, row, color);
    }
  }
}

}  // namespace shapedl
