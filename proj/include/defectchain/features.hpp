#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "defectchain/image.hpp"
#include "defectchain/model.hpp"

namespace defectchain {

enum class DescriptorKind { kOrb256 };

struct FeatureConfig {
  DescriptorKind kind = DescriptorKind::kOrb256;
  int fast_threshold = 20;
  int target_keypoints = 2000;
  int pyramid_levels = 8;
  double scale_factor = 1.2;
  int patch_radius = 15;
  std::uint64_t descriptor_pattern_seed = 0x0b5eed;

  // Throws ConfigError.
  void validate() const;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Smallest side accepted for any pyramid level.
inline constexpr int kMinLevelSize = 32;

struct Pyramid {
  std::vector<GrayImage> levels;
  double scale_factor = 1.0;
  std::vector<double> level_scales;  // scale_factor^k

  // Maps a pixel-centre coordinate on level k to level 0.
  Point2 to_base(Point2 p, int level) const;
};

// Level k has size floor(base / scale_factor^k) and is produced by area
// (box) resampling of level 0. Stops at pyramid_levels or before a level
// whose smaller side would drop below kMinLevelSize.
Pyramid build_pyramid(const GrayImage& img, const FeatureConfig& cfg);

// FAST-9 on the 16-pixel Bresenham circle of radius 3: a contiguous arc of
// at least 9 pixels all brighter than centre+threshold or all darker than
// centre-threshold.
bool segment_test(const GrayImage& level, int x, int y, int threshold);

// Segment-test corners, scored with the Harris measure, 3x3 non-maximum
// suppression, at least patch_radius from the border. Positions are in the
// level's own pixel coordinates, refined to sub-pixel by a quadratic fit of
// the response (the refinement never moves a point by more than half a
// pixel). Octave is left at 0.
std::vector<Keypoint> detect_corners(const GrayImage& level, const FeatureConfig& cfg);

// Intensity-centroid angle atan2(m01, m10) over the disc of radius
// patch_radius centred on the keypoint's nearest pixel, in [0, 2pi).
// Returns 0 when both moments vanish.
double compute_orientation(const GrayImage& level, const Keypoint& kp,
                           const FeatureConfig& cfg);

// 256 sampling pairs drawn once from a seed. Offsets lie in the disc of
// radius patch_radius - 2 so that any rotation stays inside the patch.
class DescriptorPattern {
 public:
  struct Pair {
    int px, py, qx, qy;
  };

  DescriptorPattern(std::uint64_t seed, int patch_radius);

  const std::array<Pair, BinaryDescriptor::kBits>& pairs() const { return pairs_; }

 private:
  std::array<Pair, BinaryDescriptor::kBits> pairs_;
};

// Separable 9-tap binomial blur with replicated borders. Descriptors are
// sampled from the smoothed level.
GrayImage smooth_for_descriptor(const GrayImage& level);

// Bit i is set iff I(p_i) < I(q_i). Pair offsets are rotated by the
// keypoint orientation and added to its sub-pixel position; intensities are
// interpolated bilinearly.
BinaryDescriptor compute_descriptor(const GrayImage& smoothed, const Keypoint& kp,
                                    const DescriptorPattern& pattern);
BinaryDescriptor compute_descriptor(const GrayImage& smoothed, const Keypoint& kp,
                                    const FeatureConfig& cfg);

struct FeatureSet {
  std::vector<Keypoint> keypoints;  // level-0 coordinates
  std::vector<BinaryDescriptor> descriptors;

  std::size_t size() const { return keypoints.size(); }
  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual DescriptorKind kind() const = 0;
  virtual FeatureSet extract(const GrayImage& img) const = 0;
};

std::unique_ptr<FeatureExtractor> make_extractor(const FeatureConfig& cfg);

// Convenience wrapper over make_extractor(cfg)->extract(img).
FeatureSet extract_features(const GrayImage& img, const FeatureConfig& cfg);

}  // namespace defectchain
