#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "defectchain/features.hpp"
#include "defectchain/model.hpp"

namespace defectchain {

struct MatchConfig {
  double ratio = 0.8;
  bool cross_check = true;
  int max_distance = 96;
  bool ransac_enabled = true;
  int ransac_iters = 2000;
  double ransac_inlier_px = 3.0;
  int ransac_min_matches = 12;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const MatchConfig&, const MatchConfig&) = default;
};

// Row-major 3x3 planar homography, normalised so that h[8] == 1 when
// possible.
struct Homography {
  std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};

  // Returns non-finite coordinates when the point maps to infinity.
  Point2 apply(Point2 p) const;

  friend bool operator==(const Homography&, const Homography&) = default;
};

// Normalised DLT. With exactly four points this is the minimal solver;
// with more it is the algebraic least-squares fit. Returns nullopt for
// degenerate configurations.
std::optional<Homography> estimate_homography(std::span<const Point2> src,
                                              std::span<const Point2> dst);

struct PairMatches {
  IdPair images;  // canonical order; index_a refers to images.first
  std::vector<KeypointMatch> matches;
  bool verified = false;
  std::optional<Homography> homography;

  friend bool operator==(const PairMatches&, const PairMatches&) = default;
};

// Exhaustive Hamming matching of `a` against `b`. A candidate (i, j) keeps
// when j is the nearest neighbour of i (ties to the lowest index),
// d < ratio * second-nearest (or both are zero), and d <= max_distance. With
// cross_check the same conditions must hold from b to a, which makes the
// result symmetric under swapping the inputs. Sorted by index_a.
std::vector<KeypointMatch> match_descriptors(std::span<const BinaryDescriptor> a,
                                             std::span<const BinaryDescriptor> b,
                                             const MatchConfig& cfg);

// RANSAC homography over the matches (seeded from cfg.seed and the image
// pair). Fewer than ransac_min_matches, or no non-degenerate model, passes
// the input through unverified. Otherwise only inliers within
// ransac_inlier_px (forward transfer error) are kept.
PairMatches geometric_verify(const PairMatches& pm, std::span<const Keypoint> kps_a,
                             std::span<const Keypoint> kps_b, const MatchConfig& cfg);

// Match two images' features and, if enabled, verify geometrically. The
// result is canonical regardless of argument order.
PairMatches match_pair(std::string_view image_a, const FeatureSet& a,
                       std::string_view image_b, const FeatureSet& b, const MatchConfig& cfg);

}  // namespace defectchain
