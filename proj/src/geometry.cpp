#include "defectchain/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "defectchain/error.hpp"

namespace defectchain {

namespace {

double cross(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int orientation(Point2 o, Point2 a, Point2 b) {
  const double c = cross(o, a, b);
  return (c > 0.0) - (c < 0.0);
}

bool within_segment_box(Point2 a, Point2 b, Point2 p) {
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
         p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

bool on_segment(Point2 a, Point2 b, Point2 p) {
  return cross(a, b, p) == 0.0 && within_segment_box(a, b, p);
}

bool segments_touch(Point2 a, Point2 b, Point2 c, Point2 d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) {
    return true;
  }
  return (o1 == 0 && within_segment_box(a, b, c)) ||
         (o2 == 0 && within_segment_box(a, b, d)) ||
         (o3 == 0 && within_segment_box(c, d, a)) ||
         (o4 == 0 && within_segment_box(c, d, b));
}

std::vector<Point2> dedupe_ring(std::vector<Point2> ring) {
  std::vector<Point2> out;
  out.reserve(ring.size());
  for (const Point2& p : ring) {
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  }
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

// Clips `ring` against the half-plane where keep(p) holds. `cut` returns the
// intersection of segment (a,b) with the boundary line.
template <typename Keep, typename Cut>
std::vector<Point2> clip_half_plane(const std::vector<Point2>& ring, Keep keep,
                                    Cut cut) {
  std::vector<Point2> out;
  if (ring.empty()) return out;
  out.reserve(ring.size() + 4);
  Point2 prev = ring.back();
  bool prev_in = keep(prev);
  for (const Point2& cur : ring) {
    const bool cur_in = keep(cur);
    if (cur_in) {
      if (!prev_in) out.push_back(cut(prev, cur));
      out.push_back(cur);
    } else if (prev_in) {
      out.push_back(cut(prev, cur));
    }
    prev = cur;
    prev_in = cur_in;
  }
  return out;
}

}  // namespace

Polygon::Polygon(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
  for (const Point2& p : vertices_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError("polygon has a non-finite vertex");
    }
  }
  std::vector<Point2> distinct(vertices_);
  std::sort(distinct.begin(), distinct.end(), [](Point2 a, Point2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    throw ValidationError("degenerate polygon: fewer than 3 distinct vertices");
  }
  bounds_ = {vertices_[0].x, vertices_[0].y, vertices_[0].x, vertices_[0].y};
  for (const Point2& p : vertices_) {
    bounds_.min_x = std::min(bounds_.min_x, p.x);
    bounds_.min_y = std::min(bounds_.min_y, p.y);
    bounds_.max_x = std::max(bounds_.max_x, p.x);
    bounds_.max_y = std::max(bounds_.max_y, p.y);
  }
}

Polygon Polygon::rectangle(double x0, double y0, double x1, double y1) {
  return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

double Polygon::area() const { return std::abs(signed_area(vertices_)); }

bool on_boundary(Point2 p, std::span<const Point2> ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (on_segment(ring[j], ring[i], p)) return true;
  }
  return false;
}

bool point_in_region(Point2 p, const Polygon& region) {
  if (!region.bounds().contains(p)) return false;
  const auto ring = region.vertices();
  if (on_boundary(p, ring)) return true;
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = ring[j];
    const Point2 b = ring[i];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double signed_area(std::span<const Point2> ring) {
  double twice = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    twice += ring[j].x * ring[i].y - ring[i].x * ring[j].y;
  }
  return 0.5 * twice;
}

bool is_simple(std::span<const Point2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = ring[i];
    const Point2 b = ring[(i + 1) % n];
    if (a == b) return false;
    for (std::size_t k = i + 1; k < n; ++k) {
      const Point2 c = ring[k];
      const Point2 d = ring[(k + 1) % n];
      const bool next = k == i + 1;
      const bool wrap = i == 0 && k == n - 1;
      if (next) {
        // Shared vertex b == c; the far endpoints must not fold back.
        if (on_segment(a, b, d) || on_segment(c, d, a)) return false;
      } else if (wrap) {
        // Shared vertex a == d.
        if (on_segment(a, b, c) || on_segment(c, d, b)) return false;
      } else if (segments_touch(a, b, c, d)) {
        return false;
      }
    }
  }
  return true;
}

std::vector<Point2> clip_to_rect(std::span<const Point2> ring, double width,
                                 double height) {
  std::vector<Point2> out(ring.begin(), ring.end());
  auto cut_x = [](double x) {
    return [x](Point2 a, Point2 b) {
      const double t = (x - a.x) / (b.x - a.x);
      return Point2{x, a.y + t * (b.y - a.y)};
    };
  };
  auto cut_y = [](double y) {
    return [y](Point2 a, Point2 b) {
      const double t = (y - a.y) / (b.y - a.y);
      return Point2{a.x + t * (b.x - a.x), y};
    };
  };
  out = clip_half_plane(out, [](Point2 p) { return p.x >= 0.0; }, cut_x(0.0));
  out = clip_half_plane(out, [&](Point2 p) { return p.x <= width; }, cut_x(width));
  out = clip_half_plane(out, [](Point2 p) { return p.y >= 0.0; }, cut_y(0.0));
  out = clip_half_plane(out, [&](Point2 p) { return p.y <= height; }, cut_y(height));
  // Interpolation can land a hair outside on the other axis.
  for (Point2& p : out) {
    p.x = std::clamp(p.x, 0.0, width);
    p.y = std::clamp(p.y, 0.0, height);
  }
  return dedupe_ring(std::move(out));
}

std::vector<Point2> clip_to_convex(std::span<const Point2> ring,
                                   std::span<const Point2> convex) {
  std::vector<Point2> out(ring.begin(), ring.end());
  const double sign = signed_area(convex) >= 0.0 ? 1.0 : -1.0;
  const std::size_t n = convex.size();
  for (std::size_t i = 0; i < n && !out.empty(); ++i) {
    const Point2 a = convex[i];
    const Point2 b = convex[(i + 1) % n];
    auto keep = [&](Point2 p) { return sign * cross(a, b, p) >= 0.0; };
    auto cut = [&](Point2 p, Point2 q) {
      const double cp = cross(a, b, p);
      const double cq = cross(a, b, q);
      const double t = cp / (cp - cq);
      return Point2{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
    };
    out = clip_half_plane(out, keep, cut);
  }
  return dedupe_ring(std::move(out));
}

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace defectchain
