#pragma once

#include <span>
#include <vector>

namespace defectchain {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct BoundingBox {
  double min_x, min_y, max_x, max_y;

  bool contains(Point2 p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
};

// Closed polygon given by its ordered vertices (the closing edge is
// implicit). Construction rejects fewer than three distinct vertices.
class Polygon {
 public:
  explicit Polygon(std::vector<Point2> vertices);

  // Axis-aligned rectangle [x0,x1]x[y0,y1] as a 4-vertex polygon.
  static Polygon rectangle(double x0, double y0, double x1, double y1);

  std::span<const Point2> vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  const BoundingBox& bounds() const { return bounds_; }

  // Shoelace area, always non-negative.
  double area() const;

  friend bool operator==(const Polygon& a, const Polygon& b) {
    return a.vertices_ == b.vertices_;
  }

 private:
  std::vector<Point2> vertices_;
  BoundingBox bounds_;
};

// Boundary-inclusive containment. Points exactly on an edge or vertex are
// inside. Away from the boundary the crossing-number rule is applied with
// the half-open edge convention: an edge owns its lower endpoint, so a
// horizontal ray through a vertex is counted exactly once.
bool point_in_region(Point2 p, const Polygon& region);

// True when p lies on a segment of the closed polygon (exact arithmetic on
// the given doubles).
bool on_boundary(Point2 p, std::span<const Point2> ring);

double signed_area(std::span<const Point2> ring);

// Non-adjacent edges do not touch and adjacent edges share only their
// common vertex.
bool is_simple(std::span<const Point2> ring);

// Sutherland-Hodgman clip of a ring against [0,width]x[0,height].
// Consecutive duplicate vertices are removed from the result.
std::vector<Point2> clip_to_rect(std::span<const Point2> ring, double width,
                                 double height);

// Sutherland-Hodgman clip against a convex ring (counter-clockwise or
// clockwise).
std::vector<Point2> clip_to_convex(std::span<const Point2> ring,
                                   std::span<const Point2> convex);

std::vector<Point2> convex_hull(std::vector<Point2> points);

}  // namespace defectchain
