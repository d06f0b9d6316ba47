#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "shapedl/config.hpp"

using namespace shapedl;

TEST(Config, DefaultsFollowTheTable) {
  const MatchConfig cfg;
  EXPECT_EQ(cfg.fourier_descriptors_threshold, 0.98);
  EXPECT_EQ(cfg.circular_symmetry_threshold, 0.99);
  EXPECT_EQ(cfg.spatial_similarity_threshold, 0.30);
  EXPECT_EQ(cfg.symmetry_maxima_threshold, 0.10);
  EXPECT_EQ(cfg.global_similarity_threshold, 0.70);
  const Weights& w = cfg.weights;
  EXPECT_NEAR(w.spatial + w.shape + w.color + w.rotation + w.scale + w.texture, 1.0, 1e-12);
  EXPECT_EQ(cfg[Feature::Spatial].fx, 90.0);
  EXPECT_EQ(cfg[Feature::Shape].fx, 0.005);
  EXPECT_EQ(cfg[Feature::Shape].fy, 0.2);
  EXPECT_EQ(cfg[Feature::Color].fx, 110.0);
  EXPECT_EQ(cfg[Feature::Color].fy, 0.4);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ParsesKeysCommentsAndBlanks) {
  const MatchConfig cfg = parse_config(R"(# matching parameters
fourier_descriptors_threshold = 0.95

spatial_weight = 0.25   # less spatial
shape_weight = 0.35
color_sensitivity_fx = 80
texture_sensitivity_fy = 0.3
mapping_cap = 500
texture_scale_3 = 12.5
)");
  EXPECT_EQ(cfg.fourier_descriptors_threshold, 0.95);
  EXPECT_EQ(cfg.weights.spatial, 0.25);
  EXPECT_EQ(cfg.weights.shape, 0.35);
  EXPECT_EQ(cfg[Feature::Color].fx, 80.0);
  EXPECT_EQ(cfg[Feature::Texture].fy, 0.3);
  EXPECT_EQ(cfg.mapping_cap, 500u);
  EXPECT_EQ(cfg.texture_scale[3], 12.5);
  EXPECT_EQ(cfg.texture_scale[4], 1.0);
  EXPECT_EQ(cfg.global_similarity_threshold, 0.70);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("texture_scale_24 = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("fourier_descriptors_threshold 0.9\n"), ConfigError);
  EXPECT_THROW(parse_config("fourier_descriptors_threshold = high\n"), ConfigError);
  EXPECT_THROW(parse_config("spatial_weight = 0.5\n"), ConfigError);  // sum 1.2
  EXPECT_THROW(parse_config("shape_sensitivity_fy = 1.0\n"), ConfigError);
  EXPECT_THROW(parse_config("color_sensitivity_fx = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("global_similarity_threshold = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("mapping_cap = 2.5\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/shapedl.conf"), ConfigError);
  try {
    parse_config("\n\nbogus = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos) << e.what();
  }
}

TEST(Config, FormatRoundTrips) {
  MatchConfig cfg;
  cfg.weights = Weights::equal();
  cfg[Feature::Scale].fx = 0.123456789012345;
  cfg.texture_scale[7] = 3.25;
  cfg.exact_tolerance = 0.015;
  const std::string text = format_config(cfg);
  const MatchConfig back = parse_config(text);
  EXPECT_EQ(format_config(back), text);
  EXPECT_EQ(back[Feature::Scale].fx, cfg[Feature::Scale].fx);
  EXPECT_EQ(back.weights.texture, cfg.weights.texture);
  EXPECT_EQ(back.texture_scale[7], 3.25);
  EXPECT_EQ(back.exact_tolerance, 0.015);
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "shapedl_test_config.conf";
  {
    std::ofstream out(path);
    out << "global_similarity_threshold = 0.6\n";
  }
  EXPECT_EQ(load_config(path.string()).global_similarity_threshold, 0.6);
  std::filesystem::remove(path);
}
