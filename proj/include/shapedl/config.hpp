#pragma once

// Matching parameters: thresholds, feature weights, smoothing sensitivities.
// Text form is "key = value" per line; '#' starts a comment.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "shapedl/features.hpp"
#include "shapedl/geometry.hpp"

namespace shapedl {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Feature { Spatial, Shape, Color, Rotation, Scale, Texture };
inline constexpr std::size_t kFeatureCount = 6;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "spatial", "shape", "color", "rotation", "scale", "texture"};

struct Sensitivity {
  double fx = 1.0;
  double fy = 0.5;
};

struct Weights {
  double spatial = 0.30;
  double shape = 0.30;
  double color = 0.11;
  double rotation = 0.11;
  double scale = 0.11;
  double texture = 0.07;

  static Weights equal() {
    const double w = 1.0 / 6.0;
    return {w, w, w, w, w, w};
  }

  std::array<double, kFeatureCount> as_array() const {
    return {spatial, shape, color, rotation, scale, texture};
  }

  double& operator[](Feature f) {
    switch (f) {
      case Feature::Spatial: return spatial;
      case Feature::Shape: return shape;
      case Feature::Color: return color;
      case Feature::Rotation: return rotation;
      case Feature::Scale: return scale;
      case Feature::Texture: return texture;
    }
    return texture;
  }
  double operator[](Feature f) const { return as_array()[static_cast<std::size_t>(f)]; }

  void validate() const {
    double sum = 0.0;
    for (double w : as_array()) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("weights must sum to 1, got " + std::to_string(sum));
  }
};

struct MatchConfig {
  double fourier_descriptors_threshold = 0.98;
  double circular_symmetry_threshold = 0.99;
  double spatial_similarity_threshold = 0.30;
  double symmetry_maxima_threshold = 0.10;
  double global_similarity_threshold = 0.70;

  Weights weights;
  std::array<Sensitivity, kFeatureCount> sensitivity = {{
      {90.0, 0.4},    // spatial, degrees
      {0.005, 0.2},   // shape, 1 - sim_ss
      {110.0, 0.4},   // color, RGB distance
      {90.0, 0.4},    // rotation, degrees
      {0.5, 0.4},     // scale, ratio difference
      {110.0, 0.4},   // texture
  }};

  // Per-band divisor for texture differences (1 leaves raw filter magnitudes).
  TextureVec texture_scale = [] {
    TextureVec t;
    t.fill(1.0);
    return t;
  }();

  // Exact recognition tolerance, relative to component size.
  double exact_tolerance = 0.02;
  // Relaxed candidate count when no region passes the descriptor threshold.
  std::size_t relaxed_candidates = 3;
  std::size_t mapping_cap = 10000;

  FeatureConfig features;

  const Sensitivity& operator[](Feature f) const { return sensitivity[static_cast<std::size_t>(f)]; }
  Sensitivity& operator[](Feature f) { return sensitivity[static_cast<std::size_t>(f)]; }

  void validate() const {
    weights.validate();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto& s = sensitivity[i];
      if (!(s.fx > 0.0)) throw ConfigError(std::string(kFeatureNames[i]) + "_sensitivity_fx must be > 0");
      if (!(s.fy > 0.0 && s.fy < 1.0))
        throw ConfigError(std::string(kFeatureNames[i]) + "_sensitivity_fy must be in (0,1)");
    }
    for (double t : {fourier_descriptors_threshold, circular_symmetry_threshold,
                     spatial_similarity_threshold, symmetry_maxima_threshold,
                     global_similarity_threshold})
      if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("thresholds must lie in [0,1]");
    for (double s : texture_scale)
      if (!(s > 0.0)) throw ConfigError("texture_scale entries must be > 0");
    if (!(exact_tolerance > 0.0)) throw ConfigError("exact_tolerance must be > 0");
    if (relaxed_candidates < 1) throw ConfigError("relaxed_candidates must be >= 1");
    if (mapping_cap < 1) throw ConfigError("mapping_cap must be >= 1");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(const std::string& key, const std::string& value, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty() || !std::isfinite(v))
    throw ConfigError("line " + std::to_string(line) + ": '" + key + "' needs a number, got '" + value + "'");
  return v;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the short form when it round-trips.
  char shortbuf[64];
  std::snprintf(shortbuf, sizeof shortbuf, "%g", v);
  return std::stod(shortbuf) == v ? shortbuf : buf;
}

}  // namespace detail

/// Reads "key = value" text over the defaults. Unknown keys are errors.
inline MatchConfig parse_config(std::string_view text, MatchConfig cfg = {}) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string body = detail::trim(raw);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    const double v = detail::parse_number(key, value, line);

    if (key == "fourier_descriptors_threshold") { cfg.fourier_descriptors_threshold = v; continue; }
    if (key == "circular_symmetry_threshold") { cfg.circular_symmetry_threshold = v; continue; }
    if (key == "spatial_similarity_threshold") { cfg.spatial_similarity_threshold = v; continue; }
    if (key == "symmetry_maxima_threshold") { cfg.symmetry_maxima_threshold = v; continue; }
    if (key == "global_similarity_threshold") { cfg.global_similarity_threshold = v; continue; }
    if (key == "exact_tolerance") { cfg.exact_tolerance = v; continue; }
    if (key == "relaxed_candidates" || key == "mapping_cap") {
      if (v < 1 || v != std::floor(v))
        throw ConfigError("line " + std::to_string(line) + ": '" + key + "' needs a positive integer");
      (key == "mapping_cap" ? cfg.mapping_cap : cfg.relaxed_candidates) = static_cast<std::size_t>(v);
      continue;
    }
    if (key.rfind("texture_scale_", 0) == 0) {
      const std::string idx = key.substr(14);
      std::size_t i = kTextureLength;
      if (!idx.empty() && idx.find_first_not_of("0123456789") == std::string::npos) i = std::stoul(idx);
      if (i >= kTextureLength) throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
      cfg.texture_scale[i] = v;
      continue;
    }
    bool known = false;
    for (std::size_t f = 0; f < kFeatureCount && !known; ++f) {
      const std::string name(kFeatureNames[f]);
      if (key == name + "_weight") {
        cfg.weights[static_cast<Feature>(f)] = v;
        known = true;
      } else if (key == name + "_sensitivity_fx") {
        cfg.sensitivity[f].fx = v;
        known = true;
      } else if (key == name + "_sensitivity_fy") {
        cfg.sensitivity[f].fy = v;
        known = true;
      }
    }
    if (!known) throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

inline MatchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string format_config(const MatchConfig& cfg) {
  std::ostringstream out;
  auto put = [&](std::string_view key, double v) { out << key << " = " << detail::format_number(v) << '\n'; };
  put("fourier_descriptors_threshold", cfg.fourier_descriptors_threshold);
  put("circular_symmetry_threshold", cfg.circular_symmetry_threshold);
  put("spatial_similarity_threshold", cfg.spatial_similarity_threshold);
  put("symmetry_maxima_threshold", cfg.symmetry_maxima_threshold);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const std::string name(kFeatureNames[f]);
    put(name + "_weight", cfg.weights[static_cast<Feature>(f)]);
    put(name + "_sensitivity_fx", cfg.sensitivity[f].fx);
    put(name + "_sensitivity_fy", cfg.sensitivity[f].fy);
  }
  put("global_similarity_threshold", cfg.global_similarity_threshold);
  put("exact_tolerance", cfg.exact_tolerance);
  put("relaxed_candidates", static_cast<double>(cfg.relaxed_candidates));
  put("mapping_cap", static_cast<double>(cfg.mapping_cap));
  for (std::size_t i = 0; i < kTextureLength; ++i)
    if (cfg.texture_scale[i] != 1.0) put("texture_scale_" + std::to_string(i), cfg.texture_scale[i]);
  return out.str();
}

}  // namespace shapedl
