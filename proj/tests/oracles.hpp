#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. They deliberately avoid the library's own helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "defectchain/defect_match.hpp"
#include "defectchain/features.hpp"
#include "defectchain/geometry.hpp"
#include "defectchain/matching.hpp"
#include "defectchain/model.hpp"
#include "defectchain/retrieval.hpp"

namespace oracle {

using defectchain::BinaryDescriptor;
using defectchain::Point2;

// Even-odd ray casting (Franklin) plus an explicit on-segment check.
inline bool on_segment(Point2 p, Point2 a, Point2 b) {
  const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  if (cross != 0.0) return false;
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

inline bool ray_cast_inside(Point2 p, const std::vector<Point2>& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (on_segment(p, ring[i], ring[(i + 1) % n])) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = ring[i], b = ring[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

// Star-shaped ring with integer vertices around (cx, cy); always simple
// because angles strictly increase.
inline std::vector<Point2> random_star(std::mt19937_64& rng, double cx, double cy, double rmin, double rmax,
                                       int n) {
  std::uniform_real_distribution<double> rad(rmin, rmax);
  std::vector<Point2> ring;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    const double r = rad(rng);
    ring.push_back({std::round(cx + r * std::cos(a)), std::round(cy + r * std::sin(a))});
  }
  ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  while (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

inline int hamming_bits(const BinaryDescriptor& a, const BinaryDescriptor& b) {
  int d = 0;
  for (int i = 0; i < BinaryDescriptor::kBits; ++i) d += a.bit(i) != b.bit(i);
  return d;
}

inline BinaryDescriptor random_descriptor(std::mt19937_64& rng) {
  return {{rng(), rng(), rng(), rng()}};
}

inline BinaryDescriptor flip_bits(BinaryDescriptor d, int count, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> bit(0, BinaryDescriptor::kBits - 1);
  std::set<int> chosen;
  while (int(chosen.size()) < count) chosen.insert(bit(rng));
  for (int i : chosen) d.set_bit(i, !d.bit(i));
  return d;
}

// Same rules as the matcher, recomputed with a naive double loop per
// direction.
inline std::vector<defectchain::KeypointMatch> match_double_loop(const std::vector<BinaryDescriptor>& a,
                                                                 const std::vector<BinaryDescriptor>& b,
                                                                 const defectchain::MatchConfig& cfg) {
  auto best_of = [&](const std::vector<BinaryDescriptor>& q, const std::vector<BinaryDescriptor>& t,
                     std::size_t i, std::size_t& best, int& d1, std::optional<int>& d2) {
    std::vector<int> ds;
    for (std::size_t j = 0; j < t.size(); ++j) ds.push_back(hamming_bits(q[i], t[j]));
    best = std::size_t(std::min_element(ds.begin(), ds.end()) - ds.begin());
    d1 = ds[best];
    d2.reset();
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (j != best && (!d2 || ds[j] < *d2)) d2 = ds[j];
    }
  };
  auto ok = [&](int d1, const std::optional<int>& d2) {
    if (d1 > cfg.max_distance) return false;
    if (!d2) return true;
    if (*d2 == 0) return d1 == 0;
    return d1 < cfg.ratio * *d2;
  };
  std::vector<defectchain::KeypointMatch> out;
  if (a.empty() || b.empty()) return out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::size_t j;
    int d1;
    std::optional<int> d2;
    best_of(a, b, i, j, d1, d2);
    if (!ok(d1, d2)) continue;
    if (cfg.cross_check) {
      std::size_t back;
      int e1;
      std::optional<int> e2;
      best_of(b, a, j, back, e1, e2);
      if (back != i || !ok(e1, e2)) continue;
    }
    out.push_back({std::uint32_t(i), std::uint32_t(j), d1});
  }
  return out;
}

// Loop over every match and every pair of same-class defect detections.
inline std::map<defectchain::IdPair, int> count_triple_loop(
    const defectchain::PairMatches& pm, const std::vector<defectchain::Keypoint>& ka,
    const std::vector<defectchain::Keypoint>& kb, const std::vector<defectchain::Detection>& da,
    const std::vector<defectchain::Detection>& db) {
  std::map<defectchain::IdPair, int> out;
  for (const auto& m : pm.matches) {
    const Point2 pa = ka[m.index_a].position;
    const Point2 pb = kb[m.index_b].position;
    for (const auto& x : da) {
      if (x.category != defectchain::Category::kDefect) continue;
      const std::vector<Point2> rx(x.region.vertices().begin(), x.region.vertices().end());
      if (!ray_cast_inside(pa, rx)) continue;
      for (const auto& y : db) {
        if (y.category != defectchain::Category::kDefect || y.class_label != x.class_label) continue;
        const std::vector<Point2> ry(y.region.vertices().begin(), y.region.vertices().end());
        if (ray_cast_inside(pb, ry)) ++out[defectchain::canonical_pair(x.detection_id, y.detection_id)];
      }
    }
  }
  return out;
}

// Connected components by breadth-first flood fill, each sorted, listed
// by smallest member.
inline std::vector<std::vector<std::string>> bfs_components(
    const std::vector<std::string>& nodes, const std::vector<std::pair<std::string, std::string>>& edges) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& n : nodes) adj[n];
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::set<std::string> seen;
  std::vector<std::vector<std::string>> out;
  for (const auto& [start, _] : adj) {
    if (seen.count(start)) continue;
    std::vector<std::string> comp;
    std::queue<std::string> q;
    q.push(start);
    seen.insert(start);
    while (!q.empty()) {
      const std::string v = q.front();
      q.pop();
      comp.push_back(v);
      for (const auto& w : adj[v]) {
        if (seen.insert(w).second) q.push(w);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::uint32_t nearest_centroid(const BinaryDescriptor& d, const std::vector<BinaryDescriptor>& centroids) {
  std::uint32_t best = 0;
  int bd = 1 << 30;
  for (std::uint32_t w = 0; w < centroids.size(); ++w) {
    const int h = hamming_bits(d, centroids[w]);
    if (h < bd) {
      bd = h;
      best = w;
    }
  }
  return best;
}

// Word histogram of the quantizer recomputed from scratch: tf * idf,
// L2-normalised, zero-weight words dropped.
inline std::map<std::uint32_t, double> bow_oracle(const std::vector<BinaryDescriptor>& ds,
                                                  const defectchain::Vocabulary& v) {
  std::map<std::uint32_t, double> hist;
  for (const auto& d : ds) hist[nearest_centroid(d, v.centroids)] += 1.0;
  double norm = 0.0;
  std::map<std::uint32_t, double> out;
  for (const auto& [w, c] : hist) {
    const double x = c / double(ds.size()) * v.idf[w];
    if (x > 0.0) {
      out[w] = x;
      norm += x * x;
    }
  }
  for (auto& [w, x] : out) x /= std::sqrt(norm);
  return out;
}

// Area of `ring` inside the axis-aligned rectangle by midpoint sampling on a
// grid of spacing `step`.
inline double sampled_area_inside(const std::vector<Point2>& ring, double x0, double y0, double x1, double y1,
                                  double step) {
  double x_lo = x1, x_hi = x0, y_lo = y1, y_hi = y0;
  for (const auto& p : ring) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  x_lo = std::max(x_lo, x0);
  y_lo = std::max(y_lo, y0);
  x_hi = std::min(x_hi, x1);
  y_hi = std::min(y_hi, y1);
  double area = 0.0;
  for (double y = y_lo + step / 2; y < y_hi; y += step) {
    for (double x = x_lo + step / 2; x < x_hi; x += step) {
      if (ray_cast_inside({x, y}, ring)) area += step * step;
    }
  }
  return area;
}

}  // namespace oracle
