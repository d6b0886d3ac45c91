#include "defectchain/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "defectchain/error.hpp"
#include "defectchain/rng.hpp"

namespace defectchain {

namespace {

constexpr std::array<std::array<int, 2>, 16> kCircle = {{{0, -3}, {1, -3}, {2, -2}, {3, -1},
                                                        {3, 0},  {3, 1},  {2, 2},  {1, 3},
                                                        {0, 3},  {-1, 3}, {-2, 2}, {-3, 1},
                                                        {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};

constexpr int kHarrisRadius = 3;
constexpr double kHarrisK = 0.04;

// One axis of an area resample: each destination cell covers
// [i*scale, (i+1)*scale) of the source axis.
struct AreaTap {
  int src;
  double weight;
};

std::vector<std::vector<AreaTap>> area_taps(int src_len, int dst_len, double scale) {
  std::vector<std::vector<AreaTap>> taps(dst_len);
  for (int i = 0; i < dst_len; ++i) {
    const double lo = i * scale;
    const double hi = std::min((i + 1) * scale, double(src_len));
    double total = 0.0;
    for (int s = int(std::floor(lo)); s < src_len && s < hi; ++s) {
      const double cover = std::min(hi, s + 1.0) - std::max(lo, double(s));
      if (cover > 0.0) {
        taps[i].push_back({s, cover});
        total += cover;
      }
    }
    for (AreaTap& t : taps[i]) t.weight /= total;
  }
  return taps;
}

GrayImage area_resample(const GrayImage& src, int dst_w, int dst_h, double scale) {
  const auto tx = area_taps(src.width(), dst_w, scale);
  const auto ty = area_taps(src.height(), dst_h, scale);
  std::vector<double> rows(std::size_t(src.height()) * dst_w);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < dst_w; ++x) {
      double acc = 0.0;
      for (const AreaTap& t : tx[x]) acc += t.weight * src.at(t.src, y);
      rows[std::size_t(y) * dst_w + x] = acc;
    }
  }
  GrayImage out(dst_w, dst_h);
  for (int y = 0; y < dst_h; ++y) {
    for (int x = 0; x < dst_w; ++x) {
      double acc = 0.0;
      for (const AreaTap& t : ty[y]) acc += t.weight * rows[std::size_t(t.src) * dst_w + x];
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(acc + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

// Harris measure from box sums of Sobel gradient products over a
// (2*kHarrisRadius+1)^2 window, looked up in O(1) via integral images.
class HarrisField {
 public:
  explicit HarrisField(const GrayImage& img)
      : w_(img.width()), h_(img.height()),
        sxx_(std::size_t(w_ + 1) * (h_ + 1), 0),
        syy_(sxx_.size(), 0),
        sxy_(sxx_.size(), 0) {
    for (int y = 0; y < h_; ++y) {
      std::int64_t rxx = 0, ryy = 0, rxy = 0;
      for (int x = 0; x < w_; ++x) {
        std::int64_t gx = 0, gy = 0;
        if (x > 0 && y > 0 && x < w_ - 1 && y < h_ - 1) {
          auto p = [&](int dx, int dy) { return std::int64_t(img.at(x + dx, y + dy)); };
          gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
          gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
        }
        rxx += gx * gx;
        ryy += gy * gy;
        rxy += gx * gy;
        const std::size_t i = idx(x + 1, y + 1);
        sxx_[i] = sxx_[idx(x + 1, y)] + rxx;
        syy_[i] = syy_[idx(x + 1, y)] + ryy;
        sxy_[i] = sxy_[idx(x + 1, y)] + rxy;
      }
    }
  }

  // Caller guarantees the window fits.
  double response(int x, int y) const {
    const int x0 = x - kHarrisRadius, y0 = y - kHarrisRadius;
    const int x1 = x + kHarrisRadius + 1, y1 = y + kHarrisRadius + 1;
    auto box = [&](const std::vector<std::int64_t>& s) {
      return s[idx(x1, y1)] - s[idx(x0, y1)] - s[idx(x1, y0)] + s[idx(x0, y0)];
    };
    // Normalise to mean squared gradient of a unit-gain derivative.
    constexpr double norm = 1.0 / (49.0 * 64.0);
    const double a = box(sxx_) * norm;
    const double b = box(syy_) * norm;
    const double c = box(sxy_) * norm;
    return (a * b - c * c) - kHarrisK * (a + b) * (a + b);
  }

 private:
  std::size_t idx(int x, int y) const { return std::size_t(y) * (w_ + 1) + x; }

  int w_, h_;
  std::vector<std::int64_t> sxx_, syy_, sxy_;
};

double parabolic_offset(double left, double centre, double right) {
  if (!(left < centre && right < centre)) return 0.0;
  const double denom = left - 2.0 * centre + right;
  return std::clamp(0.5 * (left - right) / denom, -0.49, 0.49);
}

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  if (a >= two_pi) a = 0.0;
  return a;
}

struct PixelCentre {
  int x, y;
};

PixelCentre nearest_pixel(Point2 p) {
  return {int(std::lround(p.x)), int(std::lround(p.y))};
}

}  // namespace

void FeatureConfig::validate() const {
  if (fast_threshold <= 0) throw ConfigError("fast_threshold must be positive");
  if (target_keypoints < 1) throw ConfigError("target_keypoints must be >= 1");
  if (pyramid_levels < 1) throw ConfigError("pyramid_levels must be >= 1");
  if (!(scale_factor > 1.0)) throw ConfigError("scale_factor must be > 1");
  if (patch_radius < 5) throw ConfigError("patch_radius must be >= 5");
}

Point2 Pyramid::to_base(Point2 p, int level) const {
  const double s = level_scales.at(level);
  return {(p.x + 0.5) * s - 0.5, (p.y + 0.5) * s - 0.5};
}

Pyramid build_pyramid(const GrayImage& img, const FeatureConfig& cfg) {
  cfg.validate();
  if (img.width() < kMinLevelSize || img.height() < kMinLevelSize) {
    throw DataError("image " + std::to_string(img.width()) + "x" +
                    std::to_string(img.height()) + " is smaller than the 32x32 minimum");
  }
  Pyramid pyr;
  pyr.scale_factor = cfg.scale_factor;
  pyr.levels.push_back(img);
  pyr.level_scales.push_back(1.0);
  for (int k = 1; k < cfg.pyramid_levels; ++k) {
    const double scale = std::pow(cfg.scale_factor, k);
    const int w = int(std::floor(img.width() / scale));
    const int h = int(std::floor(img.height() / scale));
    if (w < kMinLevelSize || h < kMinLevelSize) break;
    pyr.levels.push_back(area_resample(img, w, h, scale));
    pyr.level_scales.push_back(scale);
  }
  return pyr;
}

bool segment_test(const GrayImage& level, int x, int y, int threshold) {
  if (x < 3 || y < 3 || x >= level.width() - 3 || y >= level.height() - 3) return false;
  const int c = level.at(x, y);
  std::array<int, 16> cls{};
  int bright = 0, dark = 0;
  for (int i = 0; i < 16; ++i) {
    const int v = level.at(x + kCircle[i][0], y + kCircle[i][1]);
    cls[i] = v > c + threshold ? 1 : (v < c - threshold ? -1 : 0);
    bright += cls[i] == 1;
    dark += cls[i] == -1;
  }
  for (int want : {1, -1}) {
    if ((want == 1 ? bright : dark) < 9) continue;
    int run = 0;
    for (int i = 0; i < 32; ++i) {
      run = cls[i & 15] == want ? run + 1 : 0;
      if (run >= 9) return true;
    }
  }
  return false;
}

std::vector<Keypoint> detect_corners(const GrayImage& level, const FeatureConfig& cfg) {
  const int w = level.width(), h = level.height();
  const int border = std::max(cfg.patch_radius, kHarrisRadius + 2);
  std::vector<Keypoint> out;
  if (w <= 2 * border || h <= 2 * border) return out;

  const int t = cfg.fast_threshold;
  std::vector<std::uint8_t> corner(std::size_t(w) * h, 0);
  bool any = false;
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      // Any 9-arc covers two of the four compass pixels.
      const int c = level.at(x, y);
      int b = 0, d = 0;
      for (int i = 0; i < 16; i += 4) {
        const int v = level.at(x + kCircle[i][0], y + kCircle[i][1]);
        b += v > c + t;
        d += v < c - t;
      }
      if (b < 2 && d < 2) continue;
      if (segment_test(level, x, y, t)) {
        corner[std::size_t(y) * w + x] = 1;
        any = true;
      }
    }
  }
  if (!any) return out;

  const HarrisField harris(level);
  std::vector<double> score(std::size_t(w) * h, 0.0);
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      if (corner[std::size_t(y) * w + x]) score[std::size_t(y) * w + x] = harris.response(x, y);
    }
  }

  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      if (!corner[i] || score[i] <= 0.0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const std::size_t j = std::size_t(y + dy) * w + (x + dx);
          if (!corner[j]) continue;
          // Ties go to the first pixel in raster order.
          const bool before = dy < 0 || (dy == 0 && dx < 0);
          if (score[j] > score[i] || (before && score[j] == score[i])) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      const double r = score[i];
      const double ox = parabolic_offset(harris.response(x - 1, y), r, harris.response(x + 1, y));
      const double oy = parabolic_offset(harris.response(x, y - 1), r, harris.response(x, y + 1));
      out.push_back(Keypoint{{x + ox, y + oy}, 0, 0.0, r});
    }
  }
  return out;
}

double compute_orientation(const GrayImage& level, const Keypoint& kp,
                           const FeatureConfig& cfg) {
  const auto [cx, cy] = nearest_pixel(kp.position);
  const int r = cfg.patch_radius;
  if (cx - r < 0 || cy - r < 0 || cx + r >= level.width() || cy + r >= level.height()) {
    throw Error("keypoint patch crosses the level border");
  }
  std::int64_t m10 = 0, m01 = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy > r * r) continue;
      const int v = level.at(cx + dx, cy + dy);
      m10 += std::int64_t(dx) * v;
      m01 += std::int64_t(dy) * v;
    }
  }
  if (m10 == 0 && m01 == 0) return 0.0;
  return normalize_angle(std::atan2(double(m01), double(m10)));
}

DescriptorPattern::DescriptorPattern(std::uint64_t seed, int patch_radius) {
  const int radius = patch_radius - 2;
  const double sigma = (2 * patch_radius + 1) / 5.0;
  Rng rng(derive_seed(seed, "descriptor-pattern"));
  auto draw = [&](int& x, int& y) {
    do {
      x = int(std::lround(rng.normal() * sigma));
      y = int(std::lround(rng.normal() * sigma));
    } while (x * x + y * y > radius * radius);
  };
  for (Pair& p : pairs_) {
    do {
      draw(p.px, p.py);
      draw(p.qx, p.qy);
    } while (p.px == p.qx && p.py == p.qy);
  }
}

GrayImage smooth_for_descriptor(const GrayImage& level) {
  static constexpr std::array<int, 9> kTaps = {1, 8, 28, 56, 70, 56, 28, 8, 1};
  const int w = level.width(), h = level.height();
  std::vector<int> tmp(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int acc = 0;
      for (int k = -4; k <= 4; ++k) acc += kTaps[k + 4] * level.at(std::clamp(x + k, 0, w - 1), y);
      tmp[std::size_t(y) * w + x] = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int acc = 0;
      for (int k = -4; k <= 4; ++k) acc += kTaps[k + 4] * tmp[std::size_t(std::clamp(y + k, 0, h - 1)) * w + x];
      out.at(x, y) = static_cast<std::uint8_t>((acc + 32768) >> 16);
    }
  }
  return out;
}

BinaryDescriptor compute_descriptor(const GrayImage& smoothed, const Keypoint& kp,
                                    const DescriptorPattern& pattern) {
  const double c = std::cos(kp.orientation);
  const double s = std::sin(kp.orientation);
  auto sample = [&](int ox, int oy) {
    const double fx = kp.position.x + ox * c - oy * s;
    const double fy = kp.position.y + ox * s + oy * c;
    const int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
    const double ax = fx - x0, ay = fy - y0;
    return (1.0 - ay) * ((1.0 - ax) * smoothed.at(x0, y0) + ax * smoothed.at(x0 + 1, y0)) +
           ay * ((1.0 - ax) * smoothed.at(x0, y0 + 1) + ax * smoothed.at(x0 + 1, y0 + 1));
  };
  BinaryDescriptor d;
  const auto& pairs = pattern.pairs();
  for (int i = 0; i < BinaryDescriptor::kBits; ++i) {
    const auto& p = pairs[i];
    d.set_bit(i, sample(p.px, p.py) < sample(p.qx, p.qy));
  }
  return d;
}

BinaryDescriptor compute_descriptor(const GrayImage& smoothed, const Keypoint& kp,
                                    const FeatureConfig& cfg) {
  return compute_descriptor(smoothed, kp, DescriptorPattern(cfg.descriptor_pattern_seed, cfg.patch_radius));
}

namespace {

class OrbExtractor final : public FeatureExtractor {
 public:
  explicit OrbExtractor(const FeatureConfig& cfg)
      : cfg_(cfg), pattern_(cfg.descriptor_pattern_seed, cfg.patch_radius) {}

  DescriptorKind kind() const override { return DescriptorKind::kOrb256; }

  FeatureSet extract(const GrayImage& img) const override {
    const Pyramid pyr = build_pyramid(img, cfg_);
    const int levels = int(pyr.levels.size());

    // Per-level budget shrinks geometrically with 1/scale_factor; unused
    // budget carries to the next level.
    const double f = 1.0 / cfg_.scale_factor;
    const double first = cfg_.target_keypoints * (1.0 - f) / (1.0 - std::pow(f, levels));
    std::vector<int> quota(levels);
    int assigned = 0;
    for (int k = 0; k < levels; ++k) {
      quota[k] = k + 1 == levels ? cfg_.target_keypoints - assigned
                                 : int(std::lround(first * std::pow(f, k)));
      assigned += quota[k];
    }

    auto by_response = [](const Keypoint& a, const Keypoint& b) {
      if (a.response != b.response) return a.response > b.response;
      if (a.octave != b.octave) return a.octave < b.octave;
      if (a.position.y != b.position.y) return a.position.y < b.position.y;
      return a.position.x < b.position.x;
    };

    struct Entry {
      Keypoint kp;
      BinaryDescriptor desc;
    };
    std::vector<Entry> all;
    int carry = 0;
    for (int k = 0; k < levels; ++k) {
      const GrayImage& level = pyr.levels[k];
      std::vector<Keypoint> kps = detect_corners(level, cfg_);
      std::sort(kps.begin(), kps.end(), by_response);
      const int budget = quota[k] + carry;
      if (int(kps.size()) > budget) kps.resize(budget);
      carry = budget - int(kps.size());
      if (kps.empty()) continue;
      const GrayImage smoothed = smooth_for_descriptor(level);
      for (Keypoint& kp : kps) {
        kp.orientation = compute_orientation(level, kp, cfg_);
        Entry e{kp, compute_descriptor(smoothed, kp, pattern_)};
        e.kp.octave = k;
        e.kp.position = pyr.to_base(kp.position, k);
        all.push_back(e);
      }
    }
    std::sort(all.begin(), all.end(),
              [&](const Entry& a, const Entry& b) { return by_response(a.kp, b.kp); });
    if (int(all.size()) > cfg_.target_keypoints) all.resize(cfg_.target_keypoints);

    FeatureSet out;
    out.keypoints.reserve(all.size());
    out.descriptors.reserve(all.size());
    for (const Entry& e : all) {
      out.keypoints.push_back(e.kp);
      out.descriptors.push_back(e.desc);
    }
    return out;
  }

 private:
  FeatureConfig cfg_;
  DescriptorPattern pattern_;
};

}  // namespace

std::unique_ptr<FeatureExtractor> make_extractor(const FeatureConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case DescriptorKind::kOrb256: return std::make_unique<OrbExtractor>(cfg);
  }
  throw ConfigError("unknown descriptor kind");
}

FeatureSet extract_features(const GrayImage& img, const FeatureConfig& cfg) {
  return make_extractor(cfg)->extract(img);
}

}  // namespace defectchain
