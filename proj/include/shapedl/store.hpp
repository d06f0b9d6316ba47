#pragma once

// A persistent, lock-guarded hierarchy with JSON-in/JSON-out operations. The
// CLI and the HTTP service both go through this class so their answers agree.

#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "shapedl/hierarchy.hpp"
#include "shapedl/io.hpp"
#include "shapedl/segmentation.hpp"
#include "shapedl/shapes.hpp"

namespace shapedl {

/// Failure with an HTTP-style status, so callers can map it to a response.
class ApiError : public Error {
 public:
  ApiError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

enum class FlushPolicy { EveryWrite, OnShutdown };

inline FlushPolicy parse_flush_policy(const std::string& s) {
  if (s == "always") return FlushPolicy::EveryWrite;
  if (s == "shutdown") return FlushPolicy::OnShutdown;
  throw ConfigError("flush policy must be 'always' or 'shutdown', got '" + s + "'");
}

struct StoreOptions {
  std::string data_dir;                // empty keeps everything in memory
  std::optional<std::string> config_path;
  FlushPolicy flush = FlushPolicy::EveryWrite;
  bool seed_shapes = true;             // a new store starts with the standard palette
};

inline const char* kStoreFile = "store.json";

/// The example's regions as a query: each region becomes an inline shape
/// posed relative to the mean region centroid, at unit scale.
inline CompositeDescription description_from_example(const SegmentedImage& ex, const std::string& id,
                                                     const FeatureConfig& cfg = {}) {
  Vec2 origin{};
  for (const auto& r : ex.regions) origin = origin + r.centroid();
  origin = origin * (1.0 / static_cast<double>(ex.size()));
  std::vector<ShapeComponent> comps;
  for (std::size_t k = 0; k < ex.size(); ++k) {
    const Region& r = ex.regions[k];
    BasicShape shape(id + "#" + std::to_string(k), r.contour(), cfg);
    const Vec2 at = r.centroid() - origin;
    comps.push_back({r.color(), r.texture(), Transform{at.x, at.y, 0.0, 1.0}, std::move(shape)});
  }
  return CompositeDescription(id, std::move(comps));
}

namespace detail {

// Maps engine errors onto API statuses.
template <class F>
auto api_guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ApiError&) {
    throw;
  } catch (const ParseError& e) {
    throw ApiError(400, e.what());
  } catch (const LayoutError& e) {
    throw ApiError(400, e.what());
  } catch (const GeometryError& e) {
    throw ApiError(400, e.what());
  } catch (const UnsatisfiableError& e) {
    throw ApiError(422, e.what());
  } catch (const IntegrityError& e) {
    throw ApiError(500, e.what());
  } catch (const DuplicateError& e) {
    throw ApiError(409, e.what());
  } catch (const Error& e) {
    throw ApiError(400, e.what());
  } catch (const Json::exception& e) {
    throw ApiError(400, e.what());
  }
}

}  // namespace detail

class Store {
 public:
  explicit Store(StoreOptions opt = {}) : opt_(std::move(opt)), h_(open()) {}

  const StoreOptions& options() const { return opt_; }

  std::string store_path() const {
    return opt_.data_dir.empty() ? std::string() : (std::filesystem::path(opt_.data_dir) / kStoreFile).string();
  }

  void flush() const {
    auto lock = read_lock();
    persist_locked();
  }

  MatchConfig config() const {
    auto lock = read_lock();
    return h_.config();
  }

  Json health() const {
    auto lock = read_lock();
    return {{"status", "ok"}, {"images", h_.images().size()}, {"descriptions", h_.description_count()}};
  }

  Json shapes() const {
    auto lock = read_lock();
    Json out = Json::array();
    for (const auto& [id, s] : h_.shapes()) out.push_back(to_json(s));
    return out;
  }

  Json add_shape(const Json& body) {
    BasicShape shape = detail::api_guarded([&] { return shape_from_json(body, config().features); });
    return write([&] {
      const std::string node = h_.add_shape(shape);
      return Json{{"id", shape.id()}, {"node", node}};
    });
  }

  Json add_description(const Json& body) {
    return write([&] {
      const CompositeDescription d = parse_description(body);
      const std::string node = h_.insert_description(d);
      const auto& n = h_.nodes().at(node);
      return Json{{"id", d.id}, {"node", node}, {"parents", n.parents}, {"children", n.children}};
    });
  }

  /// Where a description would go, without inserting it.
  Json classify(const Json& body) const {
    auto lock = read_lock();
    const CompositeDescription d = parse_description(body);
    const Placement p = detail::api_guarded([&] { return h_.classify(d); });
    Json out = {{"id", d.id}, {"parents", p.parents}, {"children", p.children}};
    out["equivalent"] = p.equivalent ? Json(*p.equivalent) : Json(nullptr);
    return out;
  }

  Json hierarchy() const {
    auto lock = read_lock();
    Json nodes = Json::array();
    for (const auto& id : h_.topological_order()) {
      const auto& n = h_.nodes().at(id);
      nodes.push_back({{"id", id},
                       {"aliases", n.aliases},
                       {"parents", n.parents},
                       {"children", n.children},
                       {"images", n.images}});
    }
    return {{"roots", h_.roots()}, {"nodes", nodes}};
  }

  Json add_image(const Json& body) {
    SegmentedImage img = detail::api_guarded([&] { return segmented_image_from_json(body, config().features); });
    return insert(std::move(img));
  }

  Json add_raster(const std::string& bytes, const std::string& id) {
    if (id.empty()) throw ApiError(400, "raster upload needs an image id");
    SegmentedImage img = segment(bytes, id);
    img.source = "raster";
    return insert(std::move(img));
  }

  /// Body: {"description": {...}, "persist": bool}.
  Json query(const Json& body) {
    if (!body.is_object() || !body.contains("description")) throw ApiError(400, "query needs a 'description'");
    const bool persist = body.contains("persist") && body["persist"].is_boolean() && body["persist"].get<bool>();
    if (persist)
      return write([&] { return results(h_.answer_query(parse_description(body["description"]), true)); });
    auto lock = read_lock();
    const CompositeDescription q = parse_description(body["description"]);
    return results(detail::api_guarded([&] { return h_.answer_query_readonly(q); }));
  }

  /// Body: {"image_id": id} for a stored image; raster bytes go through
  /// query_by_raster.
  Json query_by_example(const Json& body) {
    if (!body.is_object() || !body.contains("image_id") || !body["image_id"].is_string())
      throw ApiError(400, "query by example needs 'image_id'");
    auto lock = read_lock();
    const std::string id = body["image_id"].get<std::string>();
    const auto it = h_.images().find(id);
    if (it == h_.images().end()) throw ApiError(404, "unknown image '" + id + "'");
    const auto q = description_from_example(it->second, "example:" + id, h_.config().features);
    return results(detail::api_guarded([&] { return h_.answer_query_readonly(q); }));
  }

  Json query_by_raster(const std::string& bytes) {
    const SegmentedImage ex = segment(bytes, "example");
    auto lock = read_lock();
    const auto q = description_from_example(ex, "example", h_.config().features);
    return results(detail::api_guarded([&] { return h_.answer_query_readonly(q); }));
  }

  Json image(const std::string& id) const {
    auto lock = read_lock();
    const auto it = h_.images().find(id);
    if (it == h_.images().end()) throw ApiError(404, "unknown image '" + id + "'");
    Json out = to_json(it->second, true);
    out["links"] = h_.image_links(id);
    return out;
  }

  /// Read access for callers that need the hierarchy itself.
  template <class F>
  auto read(F&& f) const {
    auto lock = read_lock();
    return f(h_);
  }

 private:
  Hierarchy open() {
    MatchConfig cfg;
    if (opt_.config_path) cfg = load_config(*opt_.config_path);
    const std::string path = store_path();
    if (!path.empty() && std::filesystem::exists(path)) {
      Hierarchy h = Hierarchy::load(path);
      if (opt_.config_path && format_config(h.config()) != format_config(cfg))
        throw ConfigError("store '" + path + "' was built with a different configuration");
      return h;
    }
    Hierarchy h(cfg);
    if (opt_.seed_shapes)
      for (const auto& s : shapes::standard_palette()) h.add_shape(BasicShape(s.id, s.contour, cfg.features));
    if (!path.empty()) {
      std::filesystem::create_directories(opt_.data_dir);
      h.save(path);
    }
    return h;
  }

  void persist_locked() const {
    if (!opt_.data_dir.empty()) h_.save(store_path());
  }

  CompositeDescription parse_description(const Json& body) const {
    return detail::api_guarded([&] { return description_from_json(body, h_.shapes(), h_.config().features); });
  }

  SegmentedImage segment(const std::string& bytes, const std::string& id) const {
    SegmentConfig seg;
    seg.features = config().features;
    return detail::api_guarded([&] { return segment_synthetic(decode_raster(bytes), id, seg); });
  }

  Json insert(SegmentedImage img) {
    return write([&] {
      const auto links = h_.insert_image(img);
      return Json{{"id", img.id}, {"regions", img.size()}, {"links", links}};
    });
  }

  static Json results(const std::vector<RankedImage>& ranked) { return {{"results", to_json(ranked)}}; }

  // Runs a mutation under the writer lock and persists per the flush policy.
  template <class F>
  Json write(F&& f) {
    auto lock = write_lock();
    Json out = detail::api_guarded(f);
    if (opt_.flush == FlushPolicy::EveryWrite) persist_locked();
    return out;
  }

  // Readers pass through the gate; a waiting writer holds it, so a steady
  // stream of queries cannot starve inserts.
  std::shared_lock<std::shared_mutex> read_lock() const {
    { std::lock_guard gate(gate_); }
    return std::shared_lock(mu_);
  }

  std::unique_lock<std::shared_mutex> write_lock() {
    std::lock_guard gate(gate_);
    return std::unique_lock(mu_);
  }

  StoreOptions opt_;
  mutable std::mutex gate_;
  mutable std::shared_mutex mu_;
  Hierarchy h_;
};

}  // namespace shapedl
