#pragma once

// Domain types: basic shapes, posed components, composite descriptions,
// segmented regions and images.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shapedl/features.hpp"
#include "shapedl/geometry.hpp"

namespace shapedl {

/// A named closed contour whose centroid sits at the origin.
class BasicShape {
 public:
  BasicShape() = default;

  /// Re-centers the contour on its centroid.
  BasicShape(std::string id, const Contour& contour, const FeatureConfig& cfg = {}) : id_(std::move(id)) {
    const Vec2 g = shapedl::centroid(contour);
    // Already-centred contours are kept bit-for-bit so serialization round-trips.
    const bool centred = norm(g) <= 1e-9 * detail::bbox_diagonal(contour.points());
    contour_ = centred ? contour : apply_transform(Transform{-g.x, -g.y, 0.0, 1.0}, contour);
    size_ = shapedl::size(contour_);
    centroid_ = shapedl::centroid(contour_);
    descriptor_ = shape_descriptor(contour_, cfg);
  }

  const std::string& id() const { return id_; }
  const Contour& contour() const { return contour_; }
  double size() const { return size_; }
  Vec2 centroid_offset() const { return centroid_; }
  const FourierDescriptor& descriptor() const { return descriptor_; }

 private:
  std::string id_;
  Contour contour_;
  double size_ = 0.0;
  Vec2 centroid_{};
  FourierDescriptor descriptor_;
};

/// <color, texture, transform, shape>. Missing color or texture matches anything.
struct ShapeComponent {
  std::optional<ColorRGB> color;
  std::optional<TextureVec> texture;
  Transform transform;
  BasicShape shape;

  Contour placed_contour() const { return apply_transform(transform, shape.contour()); }
  Vec2 placed_centroid() const { return transform.apply(shape.centroid_offset()); }
  double placed_size() const { return transform.s * shape.size(); }
};

struct CompositeDescription {
  std::string id;
  std::vector<ShapeComponent> components;

  CompositeDescription() = default;
  CompositeDescription(std::string id_, std::vector<ShapeComponent> comps)
      : id(std::move(id_)), components(std::move(comps)) {
    if (components.empty()) throw Error("description '" + id + "' has no components");
    for (const auto& c : components) {
      c.transform.validate();
      if (c.color) c.color->validate();
    }
  }

  std::size_t size() const { return components.size(); }
};

/// Features cached alongside a region's contour.
struct RegionFeatures {
  Vec2 centroid{};
  double size = 0.0;
  FourierDescriptor descriptor;
};

class Region {
 public:
  Region() = default;

  Region(Contour contour, std::optional<ColorRGB> color, std::optional<TextureVec> texture,
         const FeatureConfig& cfg = {})
      : contour_(std::move(contour)), color_(color), texture_(texture) {
    if (color_) color_->validate();
    features_.centroid = shapedl::centroid(contour_);
    features_.size = shapedl::size(contour_);
    features_.descriptor = shape_descriptor(contour_, cfg);
  }

  /// Restores a region whose features were computed earlier.
  static Region from_cache(Contour contour, std::optional<ColorRGB> color,
                           std::optional<TextureVec> texture, RegionFeatures features) {
    Region r;
    r.contour_ = std::move(contour);
    r.color_ = color;
    r.texture_ = texture;
    r.features_ = std::move(features);
    return r;
  }

  const Contour& contour() const { return contour_; }
  const std::optional<ColorRGB>& color() const { return color_; }
  const std::optional<TextureVec>& texture() const { return texture_; }
  const RegionFeatures& features() const { return features_; }
  Vec2 centroid() const { return features_.centroid; }
  double size() const { return features_.size; }
  const FourierDescriptor& descriptor() const { return features_.descriptor; }

 private:
  Contour contour_;
  std::optional<ColorRGB> color_;
  std::optional<TextureVec> texture_;
  RegionFeatures features_;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

struct SegmentedImage {
  std::string id;
  std::vector<Region> regions;
  std::optional<std::string> source;

  /// Throws LayoutError naming the first pair of regions whose contours cross
  /// or coincide. Nested regions are allowed.
  void validate() const {
    if (regions.empty()) throw LayoutError("image '" + id + "' has no regions");
    for (std::size_t i = 0; i < regions.size(); ++i)
      for (std::size_t j = i + 1; j < regions.size(); ++j)
        if (regions_conflict(regions[i].contour(), regions[j].contour()))
          throw LayoutError("image '" + id + "': regions " + std::to_string(i) + " and " +
                            std::to_string(j) + " overlap");
  }

  std::size_t size() const { return regions.size(); }
};

/// Satisfiable iff no two placed component contours overlap in their interiors.
inline bool is_satisfiable(const CompositeDescription& d) {
  std::vector<Contour> placed;
  placed.reserve(d.components.size());
  for (const auto& c : d.components) placed.push_back(c.placed_contour());
  for (std::size_t i = 0; i < placed.size(); ++i)
    for (std::size_t j = i + 1; j < placed.size(); ++j)
      if (interiors_overlap(placed[i], placed[j])) return false;
  return true;
}

class UnsatisfiableError : public Error {
 public:
  using Error::Error;
};

/// One region per component: the placed contour with the component's color and texture.
inline SegmentedImage prototypical_image(const CompositeDescription& d, const FeatureConfig& cfg = {}) {
  if (!is_satisfiable(d))
    throw UnsatisfiableError("description '" + d.id + "' has overlapping components");
  SegmentedImage img;
  img.id = d.id;
  img.regions.reserve(d.components.size());
  for (const auto& c : d.components) img.regions.emplace_back(c.placed_contour(), c.color, c.texture, cfg);
  return img;
}

}  // namespace shapedl
