#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "shapedl/evaluation.hpp"
#include "shapedl/synthetic.hpp"
#include "support/oracles.hpp"

using namespace shapedl;

namespace {

// Score-ordered tiers from exhaustive best scores; a new tier opens once a
// score falls 1e-6 below the tier's first.
Ranking oracle_ranking(const CompositeDescription& q, const std::vector<SegmentedImage>& db, const MatchConfig& cfg) {
  std::vector<std::pair<double, std::string>> hits;
  for (const auto& img : db)
    if (auto s = oracle::best_score(q, img, cfg); s && *s >= cfg.global_similarity_threshold)
      hits.emplace_back(*s, img.id);
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  Ranking r;
  double top = 0;
  for (const auto& [s, id] : hits) {
    if (r.tiers.empty() || top - s >= 1e-6) {
      r.tiers.emplace_back();
      top = s;
    }
    r.tiers.back().push_back(id);
  }
  return r;
}

}  // namespace

TEST(Suite, Shape) {
  const auto suite = synth::build_synthetic_suite();
  EXPECT_EQ(suite.queries.size(), 3u);
  ASSERT_EQ(suite.scenes.size(), 30u);
  std::set<std::string> ids;
  for (const auto& s : suite.scenes) {
    ids.insert(s.id);
    EXPECT_EQ(s.raster.width, synth::kSceneWidth);
    EXPECT_EQ(s.raster.height, synth::kSceneHeight);
  }
  EXPECT_EQ(ids.size(), 30u);
  for (const auto& q : suite.queries) {
    EXPECT_GE(q.size(), 2u);
    EXPECT_LE(q.size(), 3u);
    const Ranking& g = suite.gold.at(q.id);
    ASSERT_EQ(g.tiers.size(), 2u);
    EXPECT_EQ(g.tiers[0].size(), synth::kFullScenesPerQuery);
    EXPECT_EQ(g.tiers[1].size(), synth::kScenesPerQuery - synth::kFullScenesPerQuery);
  }
}

TEST(Suite, Deterministic) {
  const auto a = synth::build_synthetic_suite(7), b = synth::build_synthetic_suite(7);
  ASSERT_EQ(a.scenes.size(), b.scenes.size());
  for (std::size_t i = 0; i < a.scenes.size(); ++i) EXPECT_EQ(encode_ppm(a.scenes[i].raster), encode_ppm(b.scenes[i].raster));
  EXPECT_EQ(to_json(a.gold), to_json(b.gold));
  const auto c = synth::build_synthetic_suite(8);
  EXPECT_NE(encode_ppm(a.scenes[0].raster), encode_ppm(c.scenes[0].raster));
}

TEST(Suite, SegmentationRecoversEveryPlacedShape) {
  const auto suite = synth::build_synthetic_suite();
  const auto db = synth::segment_suite(suite);
  ASSERT_EQ(db.size(), suite.scenes.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    const std::size_t q = i / synth::kScenesPerQuery;
    const bool full = i % synth::kScenesPerQuery < synth::kFullScenesPerQuery;
    const std::size_t arrangement = suite.queries[q].size() - (full ? 0 : 1);
    // One or two distractors when they fit.
    EXPECT_GE(db[i].size(), arrangement) << db[i].id;
    EXPECT_LE(db[i].size(), arrangement + 2) << db[i].id;
    EXPECT_NO_THROW(db[i].validate());
  }
}

TEST(Suite, MeanEqualsOracleRecomputation) {
  const MatchConfig cfg;
  const auto suite = synth::build_synthetic_suite();
  const auto db = synth::segment_suite(suite);
  const ExperimentReport rep = synth::run_synthetic_experiment(cfg);
  ASSERT_EQ(rep.queries.size(), suite.queries.size());
  double sum = 0;
  for (std::size_t k = 0; k < suite.queries.size(); ++k) {
    const auto& q = suite.queries[k];
    const double r = oracle::rnorm(oracle_ranking(q, db, cfg), suite.gold.at(q.id));
    EXPECT_EQ(rep.queries[k].rnorm, r) << q.id;
    sum += r;
  }
  EXPECT_EQ(rep.mean_rnorm, sum / static_cast<double>(suite.queries.size()));
}
