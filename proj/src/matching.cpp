#include "defectchain/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "defectchain/error.hpp"
#include "defectchain/rng.hpp"

namespace defectchain {

void MatchConfig::validate() const {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("ratio must lie in (0,1]");
  if (max_distance <= 0) throw ConfigError("max_distance must be positive");
  if (ransac_iters <= 0) throw ConfigError("ransac_iters must be positive");
  if (!(ransac_inlier_px > 0.0)) throw ConfigError("ransac_inlier_px must be positive");
  if (ransac_min_matches < 4) throw ConfigError("ransac_min_matches must be >= 4");
}

Point2 Homography::apply(Point2 p) const {
  const double w = h[6] * p.x + h[7] * p.y + h[8];
  if (w == 0.0) {
    return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  return {(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

namespace {

// Similarity transform taking the points to zero mean and mean distance
// sqrt(2).
Eigen::Matrix3d normalizer(std::span<const Point2> pts) {
  double mx = 0.0, my = 0.0;
  for (const Point2& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= double(pts.size());
  my /= double(pts.size());
  double mean_dist = 0.0;
  for (const Point2& p : pts) mean_dist += std::hypot(p.x - mx, p.y - my);
  mean_dist /= double(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
  return t;
}

Eigen::Vector2d transform(const Eigen::Matrix3d& t, Point2 p) {
  const Eigen::Vector3d v = t * Eigen::Vector3d(p.x, p.y, 1.0);
  return v.head<2>() / v.z();
}

double triangle_area2(Point2 a, Point2 b, Point2 c) {
  return std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

bool degenerate_quad(const std::array<Point2, 4>& q) {
  constexpr double kMinArea2 = 1e-3;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        if (triangle_area2(q[i], q[j], q[k]) < kMinArea2) return true;
      }
    }
  }
  return false;
}

}  // namespace

std::optional<Homography> estimate_homography(std::span<const Point2> src,
                                              std::span<const Point2> dst) {
  if (src.size() != dst.size() || src.size() < 4) return std::nullopt;
  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);
  const Eigen::Index n = Eigen::Index(src.size());

  Eigen::Matrix3d hn;
  if (n == 4) {
    // Minimal case: fix h33 = 1 and solve the 8x8 system.
    Eigen::Matrix<double, 8, 8> a;
    Eigen::Matrix<double, 8, 1> b;
    for (Eigen::Index i = 0; i < 4; ++i) {
      const Eigen::Vector2d p = transform(ts, src[i]);
      const Eigen::Vector2d q = transform(td, dst[i]);
      a.row(2 * i) << p.x(), p.y(), 1, 0, 0, 0, -q.x() * p.x(), -q.x() * p.y();
      a.row(2 * i + 1) << 0, 0, 0, p.x(), p.y(), 1, -q.y() * p.x(), -q.y() * p.y();
      b(2 * i) = q.x();
      b(2 * i + 1) = q.y();
    }
    Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
    if (lu.rank() < 8) return std::nullopt;
    const Eigen::Matrix<double, 8, 1> x = lu.solve(b);
    hn << x(0), x(1), x(2), x(3), x(4), x(5), x(6), x(7), 1.0;
  } else {
    Eigen::MatrixXd a(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector2d p = transform(ts, src[i]);
      const Eigen::Vector2d q = transform(td, dst[i]);
      a.row(2 * i) << p.x(), p.y(), 1, 0, 0, 0, -q.x() * p.x(), -q.x() * p.y(), -q.x();
      a.row(2 * i + 1) << 0, 0, 0, p.x(), p.y(), 1, -q.y() * p.x(), -q.y() * p.y(), -q.y();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(7) <= 1e-12 * sv(0)) return std::nullopt;
    const Eigen::VectorXd x = svd.matrixV().col(8);
    hn << x(0), x(1), x(2), x(3), x(4), x(5), x(6), x(7), x(8);
  }

  Eigen::Matrix3d hm = td.inverse() * hn * ts;
  if (!hm.allFinite() || std::abs(hm(2, 2)) < 1e-15) return std::nullopt;
  hm /= hm(2, 2);
  Homography out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.h[r * 3 + c] = hm(r, c);
  }
  return out;
}

std::vector<KeypointMatch> match_descriptors(std::span<const BinaryDescriptor> a,
                                             std::span<const BinaryDescriptor> b,
                                             const MatchConfig& cfg) {
  cfg.validate();
  std::vector<KeypointMatch> out;
  if (a.empty() || b.empty()) return out;

  constexpr int kNone = std::numeric_limits<int>::max();
  struct Best {
    int d1 = kNone;
    int d2 = kNone;
    std::uint32_t idx = 0;

    void offer(int d, std::uint32_t i) {
      if (d < d1) {
        d2 = d1;
        d1 = d;
        idx = i;
      } else if (d < d2) {
        d2 = d;
      }
    }
  };
  std::vector<Best> row(a.size()), col(b.size());
  for (std::uint32_t i = 0; i < a.size(); ++i) {
    Best& r = row[i];
    for (std::uint32_t j = 0; j < b.size(); ++j) {
      const int d = hamming(a[i], b[j]);
      r.offer(d, j);
      col[j].offer(d, i);
    }
  }

  auto passes = [&](const Best& s) {
    if (s.d1 > cfg.max_distance) return false;
    if (s.d2 == kNone) return true;
    if (s.d2 == 0) return s.d1 == 0;
    return double(s.d1) < cfg.ratio * double(s.d2);
  };

  for (std::uint32_t i = 0; i < a.size(); ++i) {
    const Best& r = row[i];
    if (!passes(r)) continue;
    if (cfg.cross_check) {
      const Best& c = col[r.idx];
      if (c.idx != i || !passes(c)) continue;
    }
    out.push_back({i, r.idx, r.d1});
  }
  return out;
}

PairMatches geometric_verify(const PairMatches& pm, std::span<const Keypoint> kps_a,
                             std::span<const Keypoint> kps_b, const MatchConfig& cfg) {
  cfg.validate();
  const std::size_t n = pm.matches.size();
  if (n < std::size_t(cfg.ransac_min_matches)) {
    PairMatches out = pm;
    out.verified = false;
    out.homography.reset();
    return out;
  }

  std::vector<Point2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = kps_a[pm.matches[i].index_a].position;
    dst[i] = kps_b[pm.matches[i].index_b].position;
  }
  const double thr2 = cfg.ransac_inlier_px * cfg.ransac_inlier_px;
  auto inliers_of = [&](const Homography& h) {
    std::vector<std::uint32_t> in;
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p = h.apply(src[i]);
      const double dx = p.x - dst[i].x, dy = p.y - dst[i].y;
      if (dx * dx + dy * dy <= thr2) in.push_back(std::uint32_t(i));
    }
    return in;
  };

  Rng rng(derive_seed(cfg.seed, "ransac|" + pm.images.first + "|" + pm.images.second));
  std::optional<Homography> best;
  std::vector<std::uint32_t> best_in;
  int max_iters = cfg.ransac_iters;
  for (int iter = 0; iter < max_iters; ++iter) {
    std::array<std::size_t, 4> pick{};
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        pick[k] = std::size_t(rng.below(n));
        fresh = std::find(pick.begin(), pick.begin() + k, pick[k]) == pick.begin() + k;
      } while (!fresh);
    }
    std::array<Point2, 4> s, d;
    for (int k = 0; k < 4; ++k) {
      s[k] = src[pick[k]];
      d[k] = dst[pick[k]];
    }
    if (degenerate_quad(s) || degenerate_quad(d)) continue;
    const auto h = estimate_homography(s, d);
    if (!h) continue;
    auto in = inliers_of(*h);
    if (in.size() > best_in.size()) {
      best = h;
      best_in = std::move(in);
      // Stop once a sample of four inliers would have been drawn with
      // probability 0.999.
      const double w = double(best_in.size()) / double(n);
      const double miss = 1.0 - w * w * w * w;
      if (miss <= 0.0) break;
      const double needed = std::ceil(std::log(0.001) / std::log(miss));
      if (needed < max_iters) max_iters = std::max(iter + 1, int(needed));
    }
  }

  PairMatches out = pm;
  if (!best || best_in.size() < 4) {
    out.verified = false;
    out.homography.reset();
    return out;
  }

  // Refit on the consensus set while it keeps growing.
  for (int round = 0; round < 5; ++round) {
    std::vector<Point2> s, d;
    for (std::uint32_t i : best_in) {
      s.push_back(src[i]);
      d.push_back(dst[i]);
    }
    const auto h = estimate_homography(s, d);
    if (!h) break;
    auto in = inliers_of(*h);
    if (in.size() < best_in.size()) break;
    const bool grew = in.size() > best_in.size();
    best = h;
    best_in = std::move(in);
    if (!grew) break;
  }

  out.matches.clear();
  for (std::uint32_t i : best_in) out.matches.push_back(pm.matches[i]);
  out.verified = true;
  out.homography = best;
  return out;
}

PairMatches match_pair(std::string_view image_a, const FeatureSet& a, std::string_view image_b,
                       const FeatureSet& b, const MatchConfig& cfg) {
  PairMatches pm;
  pm.images = canonical_pair(image_a, image_b);
  const bool swapped = pm.images.first != image_a;
  const FeatureSet& first = swapped ? b : a;
  const FeatureSet& second = swapped ? a : b;
  pm.matches = match_descriptors(first.descriptors, second.descriptors, cfg);
  if (cfg.ransac_enabled) pm = geometric_verify(pm, first.keypoints, second.keypoints, cfg);
  return pm;
}

}  // namespace defectchain
