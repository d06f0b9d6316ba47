#pragma once

// JSON interchange: shapes, descriptions, segmented images, match results,
// descriptor dumps, gold rankings.

#include <json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shapedl/approx.hpp"
#include "shapedl/features.hpp"
#include "shapedl/geometry.hpp"
#include "shapedl/model.hpp"
#include "shapedl/raster.hpp"

namespace shapedl {

using Json = nlohmann::json;

/// Named basic shapes that descriptions may refer to by id.
using ShapeLibrary = std::map<std::string, BasicShape, std::less<>>;

namespace detail {

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing '" + key + "'");
  return *it;
}

inline double number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

inline std::string text(const Json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected a string");
  return v.get<std::string>();
}

inline std::vector<Vec2> points_from_json(const Json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of [x, y] points");
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Json& p = v[i];
    if (!p.is_array() || p.size() != 2)
      throw ParseError(where + ": point " + std::to_string(i) + " must be [x, y]");
    pts.push_back({number(p[0], where), number(p[1], where)});
  }
  return pts;
}

inline Contour contour_from_json(const Json& v, const std::string& where) {
  try {
    return Contour(points_from_json(v, where));
  } catch (const GeometryError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline std::optional<ColorRGB> color_from_json(const Json& v, const std::string& where) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_array() || v.size() != 3) throw ParseError(where + ": color must be [r, g, b] or null");
  ColorRGB c{number(v[0], where), number(v[1], where), number(v[2], where)};
  try {
    c.validate();
  } catch (const Error& e) {
    throw ParseError(where + ": " + e.what());
  }
  return c;
}

inline std::optional<TextureVec> texture_from_json(const Json& v, const std::string& where) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_array() || v.size() != kTextureLength)
    throw ParseError(where + ": texture must hold 24 numbers or be null");
  TextureVec t;
  for (std::size_t i = 0; i < kTextureLength; ++i) t[i] = number(v[i], where);
  return t;
}

inline Json optional_json(const std::optional<ColorRGB>& c) {
  return c ? Json::array({c->r, c->g, c->b}) : Json(nullptr);
}

inline Json optional_json(const std::optional<TextureVec>& t) {
  return t ? Json(std::vector<double>(t->begin(), t->end())) : Json(nullptr);
}

}  // namespace detail

inline Json to_json(Vec2 p) { return Json::array({p.x, p.y}); }

inline Json to_json(const Contour& c) {
  Json arr = Json::array();
  for (const Vec2& p : c.points()) arr.push_back(to_json(p));
  return arr;
}

inline Json to_json(const Transform& t) { return {{"tx", t.tx}, {"ty", t.ty}, {"theta", t.theta}, {"s", t.s}}; }

inline Transform transform_from_json(const Json& v, const std::string& where = "transform") {
  Transform t{detail::number(detail::require(v, "tx", where), where),
              detail::number(detail::require(v, "ty", where), where),
              detail::number(detail::require(v, "theta", where), where),
              detail::number(detail::require(v, "s", where), where)};
  try {
    t.validate();
  } catch (const Error& e) {
    throw ParseError(where + ": " + e.what());
  }
  return t;
}

inline Json descriptor_to_json(const FourierDescriptor& d) {
  Json arr = Json::array();
  for (const auto& z : d.coeffs) arr.push_back(Json::array({z.real(), z.imag()}));
  return arr;
}

inline FourierDescriptor descriptor_from_json(const Json& v, const std::string& where = "descriptor") {
  if (!v.is_array() || v.size() < 3 || v.size() % 2 == 0)
    throw ParseError(where + ": expected an odd-length array of [re, im] pairs");
  FourierDescriptor d{static_cast<int>(v.size() / 2), {}};
  for (const Json& z : v) {
    if (!z.is_array() || z.size() != 2) throw ParseError(where + ": coefficient must be [re, im]");
    d.coeffs.emplace_back(detail::number(z[0], where), detail::number(z[1], where));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Shapes and descriptions

inline Json to_json(const BasicShape& b) { return {{"id", b.id()}, {"points", to_json(b.contour())}}; }

inline BasicShape shape_from_json(const Json& v, const FeatureConfig& cfg = {}) {
  const std::string id = detail::text(detail::require(v, "id", "shape"), "shape id");
  if (id.empty()) throw ParseError("shape: empty id");
  return BasicShape(id, detail::contour_from_json(detail::require(v, "points", "shape " + id), "shape " + id), cfg);
}

/// Components name their shape by id when the library holds it; otherwise the
/// shape travels inline.
inline Json to_json(const CompositeDescription& d, const ShapeLibrary* library = nullptr) {
  Json comps = Json::array();
  for (const auto& c : d.components) {
    Json shape;
    if (library && library->count(c.shape.id()))
      shape = c.shape.id();
    else
      shape = to_json(c.shape);
    comps.push_back({{"shape", shape},
                     {"color", detail::optional_json(c.color)},
                     {"texture", detail::optional_json(c.texture)},
                     {"transform", to_json(c.transform)}});
  }
  return {{"id", d.id}, {"components", comps}};
}

inline CompositeDescription description_from_json(const Json& v, const ShapeLibrary& library,
                                                  const FeatureConfig& cfg = {}) {
  const std::string id = detail::text(detail::require(v, "id", "description"), "description id");
  const std::string where = "description '" + id + "'";
  const Json& comps = detail::require(v, "components", where);
  if (!comps.is_array() || comps.empty()) throw ParseError(where + ": components must be a nonempty array");
  std::vector<ShapeComponent> out;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string cw = where + " component " + std::to_string(k);
    const Json& c = comps[k];
    const Json& s = detail::require(c, "shape", cw);
    ShapeComponent comp;
    if (s.is_string()) {
      const auto it = library.find(s.get<std::string>());
      if (it == library.end()) throw ParseError(cw + ": unknown shape '" + s.get<std::string>() + "'");
      comp.shape = it->second;
    } else if (s.is_object()) {
      Json named = s;
      if (!named.contains("id")) named["id"] = id + "#" + std::to_string(k);
      comp.shape = shape_from_json(named, cfg);
    } else {
      throw ParseError(cw + ": shape must be an id or {\"points\": [...]}");
    }
    comp.color = c.contains("color") ? detail::color_from_json(c["color"], cw) : std::nullopt;
    comp.texture = c.contains("texture") ? detail::texture_from_json(c["texture"], cw) : std::nullopt;
    comp.transform = c.contains("transform") ? transform_from_json(c["transform"], cw + " transform") : Transform{};
    out.push_back(std::move(comp));
  }
  try {
    return CompositeDescription(id, std::move(out));
  } catch (const Error& e) {
    throw ParseError(where + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Segmented images

inline Json to_json(const Region& r, bool with_features) {
  Json j = {{"contour", to_json(r.contour())},
            {"color", detail::optional_json(r.color())},
            {"texture", detail::optional_json(r.texture())}};
  if (with_features)
    j["features"] = {{"centroid", to_json(r.centroid())},
                     {"size", r.size()},
                     {"descriptor", descriptor_to_json(r.descriptor())}};
  return j;
}

inline Json to_json(const SegmentedImage& img, bool with_features = false) {
  Json regions = Json::array();
  for (const Region& r : img.regions) regions.push_back(to_json(r, with_features));
  Json j = {{"id", img.id}, {"regions", regions}};
  if (img.source) j["source"] = *img.source;
  return j;
}

/// Parses and validates; cached features are restored when present and
/// recomputed otherwise.
inline SegmentedImage segmented_image_from_json(const Json& v, const FeatureConfig& cfg = {}) {
  SegmentedImage img;
  img.id = detail::text(detail::require(v, "id", "image"), "image id");
  if (img.id.empty()) throw ParseError("image: empty id");
  const std::string where = "image '" + img.id + "'";
  const Json& regions = detail::require(v, "regions", where);
  if (!regions.is_array() || regions.empty()) throw ParseError(where + ": regions must be a nonempty array");
  if (v.contains("source") && !v["source"].is_null()) img.source = detail::text(v["source"], where + " source");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string rw = where + " region " + std::to_string(i);
    const Json& r = regions[i];
    Contour contour = detail::contour_from_json(detail::require(r, "contour", rw), rw);
    auto color = r.contains("color") ? detail::color_from_json(r["color"], rw) : std::nullopt;
    auto texture = r.contains("texture") ? detail::texture_from_json(r["texture"], rw) : std::nullopt;
    if (r.contains("features")) {
      const Json& f = r["features"];
      const Json& c = detail::require(f, "centroid", rw);
      if (!c.is_array() || c.size() != 2) throw ParseError(rw + ": centroid must be [x, y]");
      RegionFeatures feats{{detail::number(c[0], rw), detail::number(c[1], rw)}, detail::number(detail::require(f, "size", rw), rw),
                           descriptor_from_json(detail::require(f, "descriptor", rw), rw)};
      img.regions.push_back(Region::from_cache(std::move(contour), color, texture, std::move(feats)));
    } else {
      img.regions.emplace_back(std::move(contour), color, texture, cfg);
    }
  }
  try {
    img.validate();
  } catch (const LayoutError& e) {
    throw ParseError(e.what());
  }
  return img;
}

inline SegmentedImage parse_segmented_image(const std::string& bytes, const FeatureConfig& cfg = {}) {
  Json v;
  try {
    v = Json::parse(bytes);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return segmented_image_from_json(v, cfg);
}

// ---------------------------------------------------------------------------
// Match results

inline Json to_json(const FeatureSims& s) {
  return {{"spatial", s.spatial}, {"shape", s.shape},   {"color", s.color},
          {"rotation", s.rotation}, {"scale", s.scale}, {"texture", s.texture}};
}

inline Json to_json(const MatchResult& m) {
  return {{"score", m.score},
          {"breakdown", to_json(m.breakdown)},
          {"mapping", m.mapping},
          {"deltas", {{"spatial", m.deltas.spatial}, {"rotation", m.deltas.rotation}, {"scale", m.deltas.scale}}}};
}

inline Json to_json(const std::vector<RankedImage>& ranked) {
  Json results = Json::array();
  for (const auto& r : ranked) {
    Json j = to_json(r.match);
    j["image_id"] = r.image_id;
    results.push_back(std::move(j));
  }
  return results;
}

inline Json parse_json_text(const std::string& bytes, const std::string& what) {
  try {
    return Json::parse(bytes);
  } catch (const Json::exception& e) {
    throw ParseError(what + ": malformed JSON: " + e.what());
  }
}

}  // namespace shapedl
