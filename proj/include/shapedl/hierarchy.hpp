#pragma once

// Semantic index: a subsumption DAG over descriptions whose nodes carry links
// to the images for which they are the most specific satisfied descriptions.

#include <algorithm>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shapedl/approx.hpp"
#include "shapedl/config.hpp"
#include "shapedl/exact.hpp"
#include "shapedl/io.hpp"
#include "shapedl/model.hpp"

namespace shapedl {

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class DuplicateError : public Error {
 public:
  using Error::Error;
};

struct HierarchyNode {
  std::string id;
  std::vector<std::string> aliases;  // equivalent descriptions folded into this node
  std::set<std::string> parents;
  std::set<std::string> children;
  std::set<std::string> images;
};

struct Placement {
  std::set<std::string> parents;
  std::set<std::string> children;
  std::optional<std::string> equivalent;  // node equivalent to the classified description
};

inline constexpr int kStoreVersion = 1;

/// The single-component, uncolored, untextured description of a basic shape.
inline CompositeDescription basic_description(const BasicShape& b) {
  return CompositeDescription(b.id(), {ShapeComponent{std::nullopt, std::nullopt, Transform{}, b}});
}

class Hierarchy {
 public:
  explicit Hierarchy(MatchConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const MatchConfig& config() const { return cfg_; }
  const ShapeLibrary& shapes() const { return shapes_; }
  const std::map<std::string, HierarchyNode>& nodes() const { return nodes_; }
  const std::map<std::string, SegmentedImage>& images() const { return images_; }
  const std::map<std::string, CompositeDescription>& descriptions() const { return descriptions_; }

  std::size_t description_count() const { return descriptions_.size(); }

  bool has_name(const std::string& id) const { return descriptions_.count(id) || shapes_.count(id); }

  /// Node that holds the description id, directly or as an alias.
  std::optional<std::string> node_of(const std::string& description_id) const {
    const auto it = alias_to_node_.find(description_id);
    if (it == alias_to_node_.end()) return std::nullopt;
    return it->second;
  }

  const CompositeDescription& description(const std::string& id) const {
    const auto it = descriptions_.find(id);
    if (it == descriptions_.end()) throw Error("unknown description '" + id + "'");
    return it->second;
  }

  std::set<std::string> image_links(const std::string& image_id) const {
    std::set<std::string> out;
    for (const auto& [id, node] : nodes_)
      if (node.images.count(image_id)) out.insert(id);
    return out;
  }

  std::set<std::string> roots() const {
    std::set<std::string> out;
    for (const auto& [id, node] : nodes_)
      if (node.parents.empty()) out.insert(id);
    return out;
  }

  /// Registers a basic shape and places its description in the DAG.
  std::string add_shape(const BasicShape& shape) {
    if (has_name(shape.id())) throw DuplicateError("id '" + shape.id() + "' already in use");
    shapes_.emplace(shape.id(), shape);
    try {
      return insert_description(basic_description(shape));
    } catch (...) {
      shapes_.erase(shape.id());
      throw;
    }
  }

  bool subsumes(const CompositeDescription& c, const CompositeDescription& d) const {
    return shapedl::subsumes(c, d, cfg_);
  }

  bool satisfies(const SegmentedImage& img, const CompositeDescription& d) const {
    return recognize_approx(d, img, cfg_).has_value();
  }

  /// Most specific subsumers and most general subsumees of d. Subtrees whose
  /// root does not subsume d are never entered.
  Placement classify(const CompositeDescription& d) const {
    if (!is_satisfiable(d)) throw UnsatisfiableError("description '" + d.id + "' is not satisfiable");
    const SegmentedImage proto = prototypical_image(d, cfg_.features);
    Placement out;

    // Top-down: a node is tested once all of its parents subsume d.
    std::set<std::string> above;
    std::map<std::string, std::size_t> parents_ok;
    std::deque<std::string> queue;
    for (const auto& [id, node] : nodes_)
      if (node.parents.empty()) queue.push_back(id);
    while (!queue.empty()) {
      const std::string id = queue.front();
      queue.pop_front();
      if (!recognize_exact(descriptions_.at(id), proto, cfg_)) continue;
      above.insert(id);
      for (const auto& child : nodes_.at(id).children)
        if (++parents_ok[child] == nodes_.at(child).parents.size()) queue.push_back(child);
    }
    for (const auto& id : above) {
      const auto& kids = nodes_.at(id).children;
      if (std::none_of(kids.begin(), kids.end(), [&](const std::string& k) { return above.count(k) > 0; }))
        out.parents.insert(id);
    }

    for (const auto& p : out.parents)
      if (subsumes(d, descriptions_.at(p))) {
        out.equivalent = p;
        out.children = {p};
        out.parents = {p};
        return out;
      }

    // Everything d subsumes lies below all of its parents.
    std::set<std::string> pool;
    if (out.parents.empty()) {
      for (const auto& [id, node] : nodes_) pool.insert(id);
    } else {
      bool first = true;
      for (const auto& p : out.parents) {
        auto below = descendants(p);
        if (first) {
          pool = std::move(below);
          first = false;
        } else {
          std::set<std::string> keep;
          std::set_intersection(pool.begin(), pool.end(), below.begin(), below.end(),
                                std::inserter(keep, keep.begin()));
          pool = std::move(keep);
        }
      }
    }
    std::set<std::string> below_d;
    for (const auto& id : topological_order()) {
      if (!pool.count(id) || below_d.count(id)) continue;
      if (!subsumes(d, descriptions_.at(id))) continue;
      below_d.insert(id);
      for (const auto& x : descendants(id)) below_d.insert(x);
    }
    for (const auto& id : below_d) {
      const auto& ps = nodes_.at(id).parents;
      if (std::none_of(ps.begin(), ps.end(), [&](const std::string& p) { return below_d.count(p) > 0; }))
        out.children.insert(id);
    }
    return out;
  }

  /// Places d in the DAG and moves image links down to it where it is now the
  /// most specific satisfied description. Returns the node id (an existing
  /// node when d is equivalent to it).
  std::string insert_description(const CompositeDescription& d) {
    if (d.id.empty()) throw Error("description id must not be empty");
    if (descriptions_.count(d.id) || (shapes_.count(d.id) && !is_basic_of(d)))
      throw DuplicateError("id '" + d.id + "' already in use");
    const Placement place = classify(d);
    descriptions_.emplace(d.id, d);
    if (place.equivalent) {
      nodes_.at(*place.equivalent).aliases.push_back(d.id);
      alias_to_node_[d.id] = *place.equivalent;
      return *place.equivalent;
    }
    HierarchyNode node;
    node.id = d.id;
    node.parents = place.parents;
    node.children = place.children;
    for (const auto& p : place.parents)
      for (const auto& c : place.children) {
        nodes_.at(p).children.erase(c);
        nodes_.at(c).parents.erase(p);
      }
    for (const auto& p : place.parents) nodes_.at(p).children.insert(d.id);
    for (const auto& c : place.children) nodes_.at(c).parents.insert(d.id);
    nodes_.emplace(d.id, std::move(node));
    alias_to_node_[d.id] = d.id;

    // Images that can satisfy d sit under all of d's parents.
    std::set<std::string> candidates;
    if (place.parents.empty()) {
      for (const auto& [id, img] : images_) candidates.insert(id);
    } else {
      for (const auto& p : place.parents) {
        for (const auto& x : descendants(p)) collect_images(x, candidates);
        collect_images(p, candidates);
      }
    }
    for (const auto& image_id : candidates)
      if (satisfies(images_.at(image_id), d)) relink(image_id);
    return d.id;
  }

  /// Stores the image and links it at its most specific satisfied nodes.
  std::set<std::string> insert_image(const SegmentedImage& img) {
    if (img.id.empty()) throw Error("image id must not be empty");
    if (images_.count(img.id)) throw DuplicateError("image '" + img.id + "' already stored");
    img.validate();
    images_.emplace(img.id, img);
    relink(img.id);
    return image_links(img.id);
  }

  /// Images satisfying q, ranked. Only images linked around q's position in
  /// the DAG, or not linked at all, are scored.
  std::vector<RankedImage> answer_query(const CompositeDescription& q, bool persist = false) {
    if (persist) {
      insert_description(q);
    }
    return answer_query_readonly(q);
  }

  std::vector<RankedImage> answer_query_readonly(const CompositeDescription& q) const {
    const Placement place = classify(q);
    std::set<std::string> candidates;
    if (place.parents.empty()) {
      for (const auto& [id, img] : images_) candidates.insert(id);
    } else {
      std::set<std::string> region;
      for (const auto& p : place.parents) {
        region.insert(p);
        for (const auto& x : descendants(p)) region.insert(x);
        for (const auto& x : ancestors(p)) region.insert(x);
      }
      for (const auto& id : region) collect_images(id, candidates);
      for (const auto& [id, img] : images_)
        if (image_links(id).empty()) candidates.insert(id);
    }
    std::vector<RankedImage> out;
    for (const auto& id : candidates)
      if (auto m = recognize_approx(q, images_.at(id), cfg_)) out.push_back({id, std::move(*m)});
    std::sort(out.begin(), out.end(), ranked_before);
    return out;
  }

  /// Hierarchy-free ranking over every stored image.
  std::vector<RankedImage> flat_query(const CompositeDescription& q) const {
    std::vector<SegmentedImage> all;
    for (const auto& [id, img] : images_) all.push_back(img);
    return retrieve(q, all, cfg_);
  }

  std::set<std::string> descendants(const std::string& id) const {
    std::set<std::string> out;
    std::vector<std::string> stack(nodes_.at(id).children.begin(), nodes_.at(id).children.end());
    while (!stack.empty()) {
      const std::string x = stack.back();
      stack.pop_back();
      if (!out.insert(x).second) continue;
      for (const auto& c : nodes_.at(x).children) stack.push_back(c);
    }
    return out;
  }

  std::set<std::string> ancestors(const std::string& id) const {
    std::set<std::string> out;
    std::vector<std::string> stack(nodes_.at(id).parents.begin(), nodes_.at(id).parents.end());
    while (!stack.empty()) {
      const std::string x = stack.back();
      stack.pop_back();
      if (!out.insert(x).second) continue;
      for (const auto& p : nodes_.at(x).parents) stack.push_back(p);
    }
    return out;
  }

  /// Throws IntegrityError on dangling references, asymmetric edges or cycles.
  void check_integrity() const {
    for (const auto& [id, node] : nodes_) {
      if (!descriptions_.count(id)) throw IntegrityError("node '" + id + "' has no description");
      for (const auto& p : node.parents)
        if (!nodes_.count(p) || !nodes_.at(p).children.count(id))
          throw IntegrityError("edge " + p + " -> " + id + " is not mirrored");
      for (const auto& c : node.children)
        if (!nodes_.count(c) || !nodes_.at(c).parents.count(id))
          throw IntegrityError("edge " + id + " -> " + c + " is not mirrored");
      for (const auto& img : node.images)
        if (!images_.count(img)) throw IntegrityError("node '" + id + "' links unknown image '" + img + "'");
    }
    for (const auto& [alias, node] : alias_to_node_)
      if (!nodes_.count(node) || !descriptions_.count(alias))
        throw IntegrityError("alias '" + alias + "' is dangling");
    if (topological_order().size() != nodes_.size()) throw IntegrityError("hierarchy contains a cycle");
  }

  /// Kahn order with ties broken by id.
  std::vector<std::string> topological_order() const {
    std::map<std::string, std::size_t> indeg;
    for (const auto& [id, node] : nodes_) indeg[id] = node.parents.size();
    std::set<std::string> ready;
    for (const auto& [id, n] : indeg)
      if (n == 0) ready.insert(id);
    std::vector<std::string> out;
    while (!ready.empty()) {
      const std::string id = *ready.begin();
      ready.erase(ready.begin());
      out.push_back(id);
      for (const auto& c : nodes_.at(id).children)
        if (--indeg[c] == 0) ready.insert(c);
    }
    return out;
  }

  // -------------------------------------------------------------------------
  // Persistence

  Json to_json() const {
    Json shapes = Json::array();
    for (const auto& [id, s] : shapes_) shapes.push_back(shapedl::to_json(s));
    Json descriptions = Json::array();
    for (const auto& [id, d] : descriptions_) descriptions.push_back(shapedl::to_json(d, &shapes_));
    Json nodes = Json::array();
    for (const auto& [id, n] : nodes_)
      nodes.push_back({{"id", id},
                       {"aliases", n.aliases},
                       {"parents", n.parents},
                       {"children", n.children},
                       {"images", n.images}});
    Json images = Json::array();
    for (const auto& [id, img] : images_) images.push_back(shapedl::to_json(img, true));
    return {{"version", kStoreVersion},
            {"config", format_config(cfg_)},
            {"shapes", shapes},
            {"descriptions", descriptions},
            {"nodes", nodes},
            {"images", images}};
  }

  static Hierarchy from_json(const Json& v) {
    if (!v.is_object() || !v.contains("version")) throw IntegrityError("store: missing version");
    if (!v["version"].is_number_integer() || v["version"].get<int>() != kStoreVersion)
      throw IntegrityError("store: unsupported version " + v["version"].dump());
    try {
      Hierarchy h(v.contains("config") ? parse_config(v["config"].get<std::string>()) : MatchConfig{});
      for (const Json& s : v.at("shapes")) {
        BasicShape b = shape_from_json(s, h.cfg_.features);
        h.shapes_.emplace(b.id(), std::move(b));
      }
      for (const Json& d : v.at("descriptions")) {
        CompositeDescription desc = description_from_json(d, h.shapes_, h.cfg_.features);
        h.descriptions_.emplace(desc.id, std::move(desc));
      }
      for (const Json& n : v.at("nodes")) {
        HierarchyNode node;
        node.id = n.at("id").get<std::string>();
        node.aliases = n.at("aliases").get<std::vector<std::string>>();
        node.parents = n.at("parents").get<std::set<std::string>>();
        node.children = n.at("children").get<std::set<std::string>>();
        node.images = n.at("images").get<std::set<std::string>>();
        h.alias_to_node_[node.id] = node.id;
        for (const auto& a : node.aliases) h.alias_to_node_[a] = node.id;
        h.nodes_.emplace(node.id, std::move(node));
      }
      for (const Json& i : v.at("images")) {
        SegmentedImage img = segmented_image_from_json(i, h.cfg_.features);
        h.images_.emplace(img.id, std::move(img));
      }
      h.check_integrity();
      return h;
    } catch (const Json::exception& e) {
      throw IntegrityError(std::string("store: ") + e.what());
    } catch (const ParseError& e) {
      throw IntegrityError(std::string("store: ") + e.what());
    }
  }

  /// Writes to a sibling temp file, then renames over the target.
  void save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    write_file(tmp, to_json().dump(1) + "\n");
    std::filesystem::rename(tmp, path);
  }

  static Hierarchy load(const std::string& path) {
    if (!std::filesystem::exists(path)) throw Error("store '" + path + "' does not exist");
    return from_json(parse_json_text(read_file(path), "store '" + path + "'"));
  }

 private:
  bool is_basic_of(const CompositeDescription& d) const {
    const auto it = shapes_.find(d.id);
    return it != shapes_.end() && d.size() == 1 && d.components[0].shape.id() == d.id;
  }

  void collect_images(const std::string& node_id, std::set<std::string>& out) const {
    for (const auto& i : nodes_.at(node_id).images) out.insert(i);
  }

  // Recomputes an image's links by a top-down pass: a node is tested when all
  // of its parents are satisfied.
  void relink(const std::string& image_id) {
    for (auto& [id, node] : nodes_) node.images.erase(image_id);
    const SegmentedImage& img = images_.at(image_id);
    std::set<std::string> sat;
    std::map<std::string, std::size_t> parents_ok;
    std::deque<std::string> queue;
    for (const auto& [id, node] : nodes_)
      if (node.parents.empty()) queue.push_back(id);
    while (!queue.empty()) {
      const std::string id = queue.front();
      queue.pop_front();
      if (!satisfies(img, descriptions_.at(id))) continue;
      sat.insert(id);
      for (const auto& child : nodes_.at(id).children)
        if (++parents_ok[child] == nodes_.at(child).parents.size()) queue.push_back(child);
    }
    for (const auto& id : sat) {
      const auto& kids = nodes_.at(id).children;
      if (std::none_of(kids.begin(), kids.end(), [&](const std::string& k) { return sat.count(k) > 0; }))
        nodes_.at(id).images.insert(image_id);
    }
  }

  MatchConfig cfg_;
  ShapeLibrary shapes_;
  std::map<std::string, CompositeDescription> descriptions_;
  std::map<std::string, std::string> alias_to_node_;
  std::map<std::string, HierarchyNode> nodes_;
  std::map<std::string, SegmentedImage> images_;
};

}  // namespace shapedl
