#include <gtest/gtest.h>

#include "defectchain/error.hpp"
#include "defectchain/synth.hpp"
#include "oracles.hpp"

using namespace defectchain;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.canvas_width = 700;
  c.canvas_height = 600;
  c.crop_width = 256;
  c.crop_height = 192;
  c.n_crops = 16;
  c.n_utilities = 0;
  c.n_defects = 4;
  c.defect_radius_min = 20;
  c.defect_radius_max = 30;
  c.embedding_dim = 8;
  return c;
}

}  // namespace

TEST(Synth, DeterministicInSeed) {
  const SynthDataset a = generate(small(3)), b = generate(small(3)), c = generate(small(4));
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_EQ(a.detections, b.detections);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  EXPECT_NE(a.pixels, c.pixels);
}

TEST(Synth, ShapesAndIds) {
  const SynthConfig cfg = small(5);
  const SynthDataset d = generate(cfg);
  ASSERT_EQ(d.images.size(), std::size_t(cfg.n_crops));
  ASSERT_EQ(d.pixels.size(), d.images.size());
  ASSERT_TRUE(d.embeddings);
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    EXPECT_EQ(d.pixels[i].width(), cfg.crop_width);
    EXPECT_EQ(d.pixels[i].height(), cfg.crop_height);
    EXPECT_EQ((*d.embeddings)[i].size(), std::size_t(cfg.embedding_dim));
    EXPECT_EQ(d.images[i].acquisition_tag, cfg.acquisition_tag);
  }
  std::set<std::string> ids;
  for (const auto& det : d.detections) {
    EXPECT_TRUE(ids.insert(det.detection_id).second);
    EXPECT_EQ(d.classes.category_of(det.class_label), det.category);
  }
  std::set<std::string, std::less<>> known(ids.begin(), ids.end());
  EXPECT_NO_THROW(validate_ground_truth(d.ground_truth, known));
}

TEST(Synth, DisjointCropsHaveNoTruePairs) {
  SynthConfig cfg = small(6);
  cfg.overlap_target = 0.0;
  cfg.rotation_jitter_deg = 0.0;
  cfg.min_visible_fraction = 0.6;
  cfg.n_crops = 4;
  cfg.n_defects = 1;
  const SynthDataset d = generate(cfg);
  EXPECT_TRUE(d.ground_truth.pairwise_matches.empty());
  for (const auto& c : d.ground_truth.chains) EXPECT_EQ(c.size(), 1u);
}

TEST(Synth, DetectionsMatchVisibilityOracle) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const SynthConfig cfg = small(seed);
    const SynthDataset d = generate(cfg);
    std::set<std::string> got;
    for (const auto& det : d.detections) got.insert(det.detection_id);
    for (const auto& crop : d.truth.crops) {
      for (const auto& obj : d.truth.objects) {
        std::vector<Point2> local;
        for (const auto& p : obj.canvas_region.vertices()) local.push_back(crop.to_crop(p));
        const double full = std::abs(signed_area(local));
        const double seen = oracle::sampled_area_inside(local, 0, 0, crop.width, crop.height, 0.5);
        const double frac = seen / full;
        // Grid sampling is only trusted away from the cut-off.
        if (std::abs(frac - cfg.min_visible_fraction) < 0.03) continue;
        EXPECT_EQ(got.count(crop.image_id + "_" + obj.id) == 1, frac >= cfg.min_visible_fraction)
            << crop.image_id << " " << obj.id << " " << frac;
      }
    }
  }
}

TEST(Synth, TruthChainsFollowProvenance) {
  const SynthDataset d = generate(small(8));
  std::map<std::string, std::string> obj_of(d.truth.provenance.begin(), d.truth.provenance.end());
  for (const auto& chain : d.ground_truth.chains) {
    for (const auto& m : chain) EXPECT_EQ(obj_of.at(m), obj_of.at(chain.front()));
  }
  for (const auto& p : d.ground_truth.pairwise_matches) EXPECT_EQ(obj_of.at(p.first), obj_of.at(p.second));
}

TEST(Synth, RulerScenarioIsReproducible) {
  SynthConfig cfg = small(9);
  cfg.canvas_width = 1100;
  const Fig2Scenario a = plant_fig2_scenario(cfg, 3), b = plant_fig2_scenario(cfg, 3);
  EXPECT_EQ(a.dataset.pixels, b.dataset.pixels);
  EXPECT_EQ(a.dataset.detections, b.dataset.detections);
  EXPECT_NE(a.trap_a, a.trap_b);
  int rulers = 0;
  for (const auto& det : a.dataset.detections) rulers += det.category == Category::kUtility;
  EXPECT_EQ(rulers, 2);
  EXPECT_TRUE(a.dataset.ground_truth.pairwise_matches.empty());
}

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.crop_width = c.canvas_width + 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.overlap_target = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.rotation_jitter_deg = 90;
  EXPECT_THROW(generate(c), ConfigError);
}
