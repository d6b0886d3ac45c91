#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "defectchain/geometry.hpp"
#include "defectchain/image.hpp"
#include "defectchain/model.hpp"

namespace defectchain {

struct SynthConfig {
  std::uint64_t seed = 7;
  int canvas_width = 2048;
  int canvas_height = 2048;
  int n_crops = 30;
  int crop_width = 640;
  int crop_height = 480;
  double overlap_target = 0.5;  // fraction shared by grid neighbours
  int n_defects = 10;
  std::vector<std::string> defect_classes{"crack", "corrosion"};
  int n_utilities = 2;
  double rotation_jitter_deg = 10.0;
  double noise_sigma = 2.0;
  double defect_radius_min = 45.0;
  double defect_radius_max = 70.0;
  double min_visible_fraction = 0.5;
  int embedding_dim = 64;  // 0 disables the embedding file
  std::string acquisition_tag = "UAV";

  void validate() const;
};

// canvas = center + scale * R(angle) * (crop - crop_centre), with
// crop_centre = ((w-1)/2, (h-1)/2). Pixel centres sit at integer
// coordinates in both frames.
struct CropTransform {
  std::string image_id;
  Point2 center;
  double angle = 0.0;  // radians
  double scale = 1.0;
  int width = 0;
  int height = 0;

  Point2 to_canvas(Point2 crop) const;
  Point2 to_crop(Point2 canvas) const;
  // Crop rectangle [0,w]x[0,h] mapped onto the canvas.
  std::vector<Point2> footprint() const;
};

struct PlantedObject {
  std::string id;
  Category category = Category::kDefect;
  std::string class_label;
  Polygon canvas_region;
};

struct SynthTruth {
  std::vector<CropTransform> crops;
  std::vector<PlantedObject> objects;
  // detection id -> planted object id
  std::vector<std::pair<std::string, std::string>> provenance;
};

struct SynthDataset {
  std::string dataset_id;
  std::vector<ImageRecord> images;  // source_path is relative ("images/<id>.pgm")
  std::vector<GrayImage> pixels;
  ClassTable classes;
  std::vector<Detection> detections;
  std::optional<std::vector<std::vector<float>>> embeddings;  // aligned with images
  GroundTruth ground_truth;
  SynthTruth truth;
};

// Textured canvas with planted convex defect regions and ruler utilities,
// cut into overlapping rotated crops laid out on a serpentine grid.
// A planted object becomes a detection in every crop that shows at least
// min_visible_fraction of its area. Deterministic in cfg.seed.
SynthDataset generate(const SynthConfig& cfg);

// Two crops from disjoint canvas regions carrying an identical ruler
// annotated as a utility, followed by `background` further disjoint crops
// without rulers that give retrieval a realistic document-frequency
// baseline. trap_a/trap_b name the two ruler images.
struct Fig2Scenario {
  SynthDataset dataset;
  std::string trap_a;
  std::string trap_b;
};

Fig2Scenario plant_fig2_scenario(const SynthConfig& cfg, int background = 8);

// Seeded concrete-like texture: multi-octave value noise under a dense
// scatter of small opaque shapes.
GrayImage render_texture(int width, int height, std::uint64_t seed);

}  // namespace defectchain
