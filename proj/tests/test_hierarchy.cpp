#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "shapedl/hierarchy.hpp"
#include "shapedl/shapes.hpp"
#include "shapedl/synthetic.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace shapedl;

namespace {

using Ids = std::set<std::string>;

Hierarchy seeded() {
  Hierarchy h;
  for (const auto& s : synth::palette_shapes()) h.add_shape(s);
  return h;
}

const BasicShape& shape(const std::string& id) {
  static const auto all = synth::palette_shapes();
  return *std::find_if(all.begin(), all.end(), [&](const BasicShape& s) { return s.id() == id; });
}

ShapeComponent comp(const std::string& id, Transform t, std::optional<ColorRGB> color = std::nullopt) {
  return ShapeComponent{color, std::nullopt, t, shape(id)};
}

// A pool of descriptions with refinement chains, so the DAG has depth.
std::vector<CompositeDescription> description_pool(gen::Rng& rng, std::size_t roots, std::size_t depth) {
  const auto shapes = synth::palette_shapes();
  std::vector<CompositeDescription> out;
  for (std::size_t r = 0; r < roots; ++r) {
    const std::string base = "d" + std::to_string(r);
    CompositeDescription d = synth::random_description(rng, shapes, 1 + r % 2, base, {}, 0.5);
    out.push_back(d);
    for (std::size_t k = 1; k < depth; ++k) {
      auto next = synth::refine(rng, d, shapes, base + "." + std::to_string(k));
      if (!next) break;
      d = *next;
      out.push_back(d);
    }
  }
  return out;
}

// Strict ancestors of every node by pairwise subsumption over node descriptions.
std::map<std::string, Ids> ancestor_oracle(const Hierarchy& h) {
  std::map<std::string, Ids> out;
  for (const auto& [x, nx] : h.nodes()) {
    out[x];
    for (const auto& [y, ny] : h.nodes())
      if (x != y && subsumes(h.description(y), h.description(x), h.config())) out[x].insert(y);
  }
  return out;
}

void expect_structure_matches_oracle(const Hierarchy& h) {
  ASSERT_NO_THROW(h.check_integrity());
  EXPECT_TRUE(oracle::transitively_reduced(h));
  const auto expected = ancestor_oracle(h);
  for (const auto& [id, node] : h.nodes()) EXPECT_EQ(h.ancestors(id), expected.at(id)) << id;
  for (const auto& id : h.roots()) EXPECT_TRUE(h.shapes().count(id)) << id << " is a root but not a basic shape";
}

std::set<std::pair<std::string, std::string>> edges(const Hierarchy& h) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& [id, node] : h.nodes())
    for (const auto& c : node.children) out.emplace(id, c);
  return out;
}

std::map<std::string, double> scores(const std::vector<RankedImage>& ranked) {
  std::map<std::string, double> out;
  for (const auto& r : ranked) out[r.image_id] = r.match.score;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Classification

TEST(Classify, CompositeSitsUnderItsBasicShapes) {
  const Hierarchy h = seeded();
  const CompositeDescription d("lamp", {comp("circle", Transform{0, 0, 0, 1}, ColorRGB{255, 0, 0}),
                                        comp("square", Transform{80, 0, 0.3, 1})});
  const Placement p = h.classify(d);
  EXPECT_EQ(p.parents, (Ids{"circle", "square"}));
  EXPECT_TRUE(p.children.empty());
  EXPECT_FALSE(p.equivalent.has_value());
}

TEST(Classify, ParentsMatchPairwiseOracle) {
  gen::Rng rng(91);
  const Hierarchy h = seeded();
  const auto shapes = synth::palette_shapes();
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = synth::random_description(rng, shapes, 2, "q");
    Ids expected;
    for (const auto& s : shapes)
      if (subsumes(basic_description(s), d, h.config())) expected.insert(s.id());
    EXPECT_EQ(h.classify(d).parents, expected);
  }
}

TEST(Classify, EquivalentDescriptionIsDetected) {
  gen::Rng rng(92);
  Hierarchy h = seeded();
  const auto d = synth::random_description(rng, synth::palette_shapes(), 3, "orig");
  h.insert_description(d);
  // Same arrangement under a global pose is the same concept.
  const CompositeDescription twin("twin", synth::transformed(d.components, Transform{40, -20, 1.1, 1.3}));
  const Placement p = h.classify(twin);
  ASSERT_TRUE(p.equivalent.has_value());
  EXPECT_EQ(*p.equivalent, "orig");
  EXPECT_EQ(p.parents, Ids{"orig"});
  EXPECT_EQ(p.children, Ids{"orig"});

  const auto before = edges(h);
  EXPECT_EQ(h.insert_description(twin), "orig");
  EXPECT_EQ(edges(h), before);
  EXPECT_EQ(h.node_of("twin"), "orig");
  EXPECT_EQ(h.description_count(), 8u + 2u);
}

TEST(Classify, MiddleOfRefinementChain) {
  gen::Rng rng(93);
  const auto shapes = synth::palette_shapes();
  for (int trial = 0; trial < 5; ++trial) {
    Hierarchy h = seeded();
    const auto a = synth::random_description(rng, shapes, 1 + trial % 2, "A", {}, 0.5);
    const auto b = synth::refine(rng, a, shapes, "B");
    ASSERT_TRUE(b);
    const auto c = synth::refine(rng, *b, shapes, "C");
    ASSERT_TRUE(c);
    ASSERT_TRUE(subsumes(a, *b, h.config()));
    ASSERT_TRUE(subsumes(*b, *c, h.config()));
    h.insert_description(a);
    h.insert_description(*c);
    // An uncolored single component folds into its basic shape's node.
    const std::string top = *h.node_of("A");
    // Each refinement's extra shape also puts that basic shape above it.
    const Placement p = h.classify(*b);
    EXPECT_TRUE(p.parents.count(top));
    EXPECT_EQ(p.children, Ids{"C"});
    h.insert_description(*b);
    EXPECT_TRUE(h.nodes().at("B").parents.count(top));
    EXPECT_TRUE(h.nodes().at("C").parents.count("B"));
    EXPECT_FALSE(h.nodes().at("C").parents.count(top));
    EXPECT_FALSE(h.nodes().at(top).children.count("C"));
  }
}

TEST(Classify, Errors) {
  Hierarchy h = seeded();
  const CompositeDescription clash("clash", {comp("square", Transform{}), comp("square", Transform{})});
  EXPECT_THROW(h.classify(clash), UnsatisfiableError);
  EXPECT_THROW(h.insert_description(clash), UnsatisfiableError);
  EXPECT_FALSE(h.node_of("clash"));
  const CompositeDescription d("dup", {comp("circle", Transform{}), comp("bar", Transform{90, 0, 0, 1})});
  h.insert_description(d);
  EXPECT_THROW(h.insert_description(d), DuplicateError);
  EXPECT_THROW(h.insert_description(CompositeDescription("square", d.components)), DuplicateError);
  EXPECT_THROW(h.add_shape(shape("circle")), DuplicateError);
}

// ---------------------------------------------------------------------------
// Structure

TEST(Structure, MatchesPairwiseSubsumptionAfterEachInsert) {
  gen::Rng rng(94);
  for (int round = 0; round < 3; ++round) {
    Hierarchy h = seeded();
    auto pool = description_pool(rng, 4, 3);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (const auto& d : pool) {
      h.insert_description(d);
      expect_structure_matches_oracle(h);
    }
  }
}

TEST(Structure, InsertionOrderIndependent) {
  gen::Rng rng(95);
  for (int round = 0; round < 3; ++round) {
    const auto pool = description_pool(rng, 4, 3);
    auto build = [&](std::vector<CompositeDescription> order) {
      std::shuffle(order.begin(), order.end(), rng);
      Hierarchy h = seeded();
      for (const auto& d : order) h.insert_description(d);
      return h;
    };
    const Hierarchy a = build(pool), b = build(pool);
    EXPECT_EQ(edges(a), edges(b));
    Ids na, nb;
    for (const auto& [id, n] : a.nodes()) na.insert(id);
    for (const auto& [id, n] : b.nodes()) nb.insert(id);
    EXPECT_EQ(na, nb);
  }
}

// ---------------------------------------------------------------------------
// Image links

TEST(Images, PrototypeLinksAtItsDescription) {
  gen::Rng rng(96);
  Hierarchy h = seeded();
  const auto pool = description_pool(rng, 3, 2);
  for (const auto& d : pool) h.insert_description(d);
  for (const auto& d : pool) {
    SegmentedImage img = prototypical_image(d);
    img.id = "proto-" + d.id;
    const Ids links = h.insert_image(img);
    const std::string node = *h.node_of(d.id);
    // At d itself, or below it when a refinement also matches.
    EXPECT_TRUE(links.count(node) || std::any_of(links.begin(), links.end(), [&](const std::string& l) {
                  return h.ancestors(l).count(node) > 0;
                })) << d.id;
  }
}

TEST(Images, SingleRegionLinksOnlyAtBasicShapes) {
  Hierarchy h = seeded();
  h.insert_description(
      CompositeDescription("pair", {comp("circle", Transform{}), comp("star", Transform{90, 0, 0, 1})}));
  SegmentedImage img;
  img.id = "lonely";
  img.regions.emplace_back(apply_transform(Transform{10, 10, 0.4, 1}, shape("triangle").contour()), ColorRGB{0, 0, 255},
                           std::nullopt);
  for (const auto& l : h.insert_image(img)) EXPECT_TRUE(h.shapes().count(l)) << l;
  EXPECT_THROW(h.insert_image(img), DuplicateError);
}

TEST(Images, LinksEqualBruteForceUnderInterleavedInserts) {
  gen::Rng rng(97);
  const auto shapes = synth::palette_shapes();
  for (int round = 0; round < 2; ++round) {
    Hierarchy h = seeded();
    auto pool = description_pool(rng, 4, 3);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t next_image = 0;
    for (const auto& d : pool) {
      // Images arrive before and after the descriptions they match.
      for (int k = 0; k < 2; ++k) {
        const auto& around = pool[synth::pick(rng, pool.size())];
        synth::SceneOptions opt;
        opt.jitter = 0.03;
        opt.drop_probability = 0.2;
        h.insert_image(synth::random_scene(rng, around, shapes, "img" + std::to_string(next_image++), opt));
      }
      h.insert_description(d);
      for (const auto& [id, img] : h.images()) EXPECT_EQ(h.image_links(id), oracle::most_specific_links(h, img)) << id;
    }
  }
}

TEST(Images, RefinementPullsLinksDown) {
  gen::Rng rng(98);
  const auto shapes = synth::palette_shapes();
  Hierarchy h = seeded();
  const auto a = synth::random_description(rng, shapes, 2, "A");
  const auto b = synth::refine(rng, a, shapes, "B");
  ASSERT_TRUE(b);
  h.insert_description(a);
  SegmentedImage img = prototypical_image(*b);
  img.id = "full";
  // Any region satisfies an uncolored basic shape, so unrelated roots link too.
  EXPECT_TRUE(h.insert_image(img).count("A"));
  h.insert_description(*b);
  EXPECT_TRUE(h.image_links("full").count("B"));
  EXPECT_FALSE(h.nodes().at("A").images.count("full"));
}

// ---------------------------------------------------------------------------
// Queries

TEST(Query, HierarchyAnswerEqualsFlatScan) {
  gen::Rng rng(99);
  const auto shapes = synth::palette_shapes();
  Hierarchy h = seeded();
  const auto pool = description_pool(rng, 4, 3);
  for (const auto& d : pool) h.insert_description(d);
  for (int i = 0; i < 30; ++i) {
    synth::SceneOptions opt;
    opt.jitter = 0.05;
    opt.drop_probability = 0.25;
    h.insert_image(synth::random_scene(rng, pool[synth::pick(rng, pool.size())], shapes, "img" + std::to_string(i), opt));
  }
  std::vector<CompositeDescription> queries = pool;
  for (int i = 0; i < 10; ++i)
    queries.push_back(synth::random_description(rng, shapes, 1 + i % 3, "fresh" + std::to_string(i)));
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (auto r = synth::refine(rng, pool[i], shapes, "ref" + std::to_string(i))) queries.push_back(*r);
  for (const auto& q : queries) {
    const auto fast = h.answer_query_readonly(q);
    const auto flat = h.flat_query(q);
    EXPECT_EQ(scores(fast), scores(flat)) << q.id;
    ASSERT_EQ(fast.size(), flat.size());
    for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_EQ(fast[k].image_id, flat[k].image_id) << q.id;
  }
}

TEST(Query, RefinementAnswersAreASubset) {
  gen::Rng rng(100);
  const auto shapes = synth::palette_shapes();
  Hierarchy h = seeded();
  const auto a = synth::random_description(rng, shapes, 2, "A");
  h.insert_description(a);
  for (int i = 0; i < 20; ++i) {
    synth::SceneOptions opt;
    opt.drop_probability = 0.2;
    h.insert_image(synth::random_scene(rng, a, shapes, "img" + std::to_string(i), opt));
  }
  const auto base = scores(h.answer_query_readonly(a));
  for (int i = 0; i < 10; ++i) {
    const auto r = synth::refine(rng, a, shapes, "R" + std::to_string(i));
    if (!r) continue;
    for (const auto& [id, s] : scores(h.answer_query_readonly(*r))) {
      EXPECT_TRUE(base.count(id)) << id;
      if (base.count(id)) EXPECT_LE(s, base.at(id) + 1e-9);
    }
  }
}

TEST(Query, PersistFlagInsertsTheQuery) {
  gen::Rng rng(101);
  Hierarchy h = seeded();
  const auto q = synth::random_description(rng, synth::palette_shapes(), 2, "asked");
  SegmentedImage img = prototypical_image(q);
  img.id = "proto";
  h.insert_image(img);
  const auto once = h.answer_query(q);
  EXPECT_FALSE(h.node_of("asked"));
  ASSERT_FALSE(once.empty());
  EXPECT_EQ(once.front().image_id, "proto");
  EXPECT_NEAR(once.front().match.score, 1.0, 1e-6);
  const auto kept = h.answer_query(q, true);
  EXPECT_EQ(h.node_of("asked"), "asked");
  EXPECT_EQ(scores(kept), scores(once));
  EXPECT_TRUE(h.image_links("proto").count("asked"));
  for (const auto& c : q.components) EXPECT_FALSE(h.image_links("proto").count(c.shape.id()));
}

// ---------------------------------------------------------------------------
// Persistence

class Persistence : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("shapedl_hierarchy_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  std::filesystem::path dir_;
};

TEST_F(Persistence, SaveLoadRoundTrip) {
  gen::Rng rng(102);
  MatchConfig cfg;
  cfg.global_similarity_threshold = 0.72;
  Hierarchy h(cfg);
  for (const auto& s : synth::palette_shapes()) h.add_shape(s);
  const auto pool = description_pool(rng, 3, 2);
  for (const auto& d : pool) h.insert_description(d);
  for (int i = 0; i < 6; ++i)
    h.insert_image(synth::random_scene(rng, pool[synth::pick(rng, pool.size())], synth::palette_shapes(),
                                       "img" + std::to_string(i)));
  h.insert_description(CompositeDescription("alias", pool[0].components));
  h.save(path("store.json"));
  EXPECT_FALSE(std::filesystem::exists(path("store.json.tmp")));

  const Hierarchy back = Hierarchy::load(path("store.json"));
  EXPECT_EQ(back.to_json(), h.to_json());
  EXPECT_EQ(back.config().global_similarity_threshold, 0.72);
  EXPECT_EQ(back.node_of("alias"), h.node_of("alias"));
  for (const auto& q : pool) EXPECT_EQ(scores(back.answer_query_readonly(q)), scores(h.answer_query_readonly(q)));
}

TEST_F(Persistence, Errors) {
  EXPECT_THROW(Hierarchy::load(path("missing.json")), Error);

  Hierarchy h = seeded();
  h.insert_description(
      CompositeDescription("pair", {comp("circle", Transform{}), comp("star", Transform{90, 0, 0, 1})}));
  Json j = h.to_json();

  Json cyclic = j;
  for (auto& n : cyclic["nodes"]) {
    if (n["id"] == "circle") n["parents"] = Json::array({"pair"});
    if (n["id"] == "pair") n["children"] = Json::array({"circle"});
  }
  write("cycle.json", cyclic.dump());
  EXPECT_THROW(Hierarchy::load(path("cycle.json")), IntegrityError);

  Json future = j;
  future["version"] = kStoreVersion + 1;
  write("future.json", future.dump());
  EXPECT_THROW(Hierarchy::load(path("future.json")), IntegrityError);

  Json dangling = j;
  dangling["nodes"][0]["images"] = Json::array({"ghost"});
  write("dangling.json", dangling.dump());
  EXPECT_THROW(Hierarchy::load(path("dangling.json")), IntegrityError);

  write("corrupt.json", j.dump().substr(0, 200));
  EXPECT_THROW(Hierarchy::load(path("corrupt.json")), Error);
}
