#include <gtest/gtest.h>

#include <random>

#include "defectchain/error.hpp"
#include "defectchain/geometry.hpp"
#include "oracles.hpp"

using namespace defectchain;

TEST(PointInRegion, SquareCentroidAndOutside) {
  const Polygon sq = Polygon::rectangle(0, 0, 10, 10);
  EXPECT_TRUE(point_in_region({5, 5}, sq));
  EXPECT_FALSE(point_in_region({20, 5}, sq));
}

TEST(PointInRegion, BoundaryIsInside) {
  const Polygon sq = Polygon::rectangle(0, 0, 10, 10);
  EXPECT_TRUE(point_in_region({0, 0}, sq));
  EXPECT_TRUE(point_in_region({10, 4}, sq));
  EXPECT_TRUE(point_in_region({3, 10}, sq));
  EXPECT_FALSE(point_in_region({10.000001, 4}, sq));
}

TEST(PointInRegion, RayThroughVertexCountedOnce) {
  // Diamond: a horizontal ray from (-1, 5) passes exactly through (0,5) and (10,5).
  const Polygon d({{5, 0}, {10, 5}, {5, 10}, {0, 5}});
  EXPECT_TRUE(point_in_region({5, 5}, d));
  EXPECT_FALSE(point_in_region({-1, 5}, d));
  EXPECT_FALSE(point_in_region({11, 5}, d));
}

TEST(PointInRegion, MatchesRayCastingOracle) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> coord(-10, 110);
  std::uniform_int_distribution<int> grid(-10, 110);
  std::uniform_int_distribution<int> nv(3, 24);
  int checked = 0;
  for (int poly = 0; poly < 100; ++poly) {
    auto ring = oracle::random_star(rng, 50, 50, 5, 55, nv(rng));
    if (ring.size() < 3 || !is_simple(ring)) {
      --poly;
      continue;
    }
    const Polygon region(ring);
    for (int i = 0; i < 100; ++i) {
      // Half the points on the integer lattice so vertices and edges are hit.
      const Point2 p = i % 2 ? Point2{coord(rng), coord(rng)} : Point2{double(grid(rng)), double(grid(rng))};
      ASSERT_EQ(point_in_region(p, region), oracle::ray_cast_inside(p, ring))
          << "polygon " << poly << " point (" << p.x << "," << p.y << ")";
      ++checked;
    }
  }
  EXPECT_EQ(checked, 10000);
}

TEST(Polygon, RejectsDegenerate) {
  EXPECT_THROW(Polygon({{0, 0}, {1, 1}}), ValidationError);
  EXPECT_THROW(Polygon({{0, 0}, {1, 1}, {1, 1}}), ValidationError);
  EXPECT_THROW(Polygon({{0, 0}, {1, 0}, {0, std::nan("")}}), ValidationError);
}

TEST(Polygon, Area) {
  EXPECT_DOUBLE_EQ(Polygon::rectangle(0, 0, 4, 3).area(), 12.0);
  EXPECT_DOUBLE_EQ(Polygon({{0, 0}, {0, 4}, {3, 0}}).area(), 6.0);
}

TEST(Simplicity, BowTieIsNotSimple) {
  const std::vector<Point2> bowtie{{0, 0}, {10, 10}, {10, 0}, {0, 10}};
  EXPECT_FALSE(is_simple(bowtie));
  const std::vector<Point2> sq{{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  EXPECT_TRUE(is_simple(sq));
}

TEST(Clip, InsideUnchanged) {
  const std::vector<Point2> tri{{10, 10}, {50, 10}, {30, 40}};
  const auto out = clip_to_rect(tri, 100, 100);
  EXPECT_DOUBLE_EQ(std::abs(signed_area(out)), std::abs(signed_area(tri)));
}

TEST(Clip, AreaMatchesSampledOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    auto ring = oracle::random_star(rng, std::uniform_real_distribution<double>(-20, 120)(rng),
                                    std::uniform_real_distribution<double>(-20, 120)(rng), 10, 40, 9);
    if (ring.size() < 3 || !is_simple(ring)) continue;
    const auto clipped = clip_to_rect(ring, 100, 100);
    const double got = clipped.size() >= 3 ? std::abs(signed_area(clipped)) : 0.0;
    const double want = oracle::sampled_area_inside(ring, 0, 0, 100, 100, 0.1);
    EXPECT_NEAR(got, want, 0.01 * std::abs(signed_area(ring)) + 1.0) << "trial " << trial;
    for (const auto& p : clipped) {
      EXPECT_GE(p.x, 0.0);
      EXPECT_LE(p.x, 100.0);
      EXPECT_GE(p.y, 0.0);
      EXPECT_LE(p.y, 100.0);
    }
  }
}

TEST(Clip, ConvexWindowAgreesWithRect) {
  const std::vector<Point2> ring{{-5, 3}, {40, 10}, {60, 90}, {10, 120}};
  const std::vector<Point2> window{{0, 0}, {100, 0}, {100, 100}, {0, 100}};
  EXPECT_NEAR(std::abs(signed_area(clip_to_convex(ring, window))),
              std::abs(signed_area(clip_to_rect(ring, 100, 100))), 1e-9);
}

TEST(Hull, SquareWithInteriorPoints) {
  const auto h = convex_hull({{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {1, 0}});
  EXPECT_EQ(h.size(), 4u);
  EXPECT_DOUBLE_EQ(std::abs(signed_area(h)), 4.0);
}
