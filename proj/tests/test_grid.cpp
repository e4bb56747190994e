#include <cmath>
#include <numbers>

#include "doctest.h"
#include "maglab/grid.hpp"

using namespace maglab;
using doctest::Approx;

TEST_CASE("rectangle grid layout and weights") {
  const GridPtr g = make_grid(Domain::rectangle({0, 1, 0, 0.5}, 0.125));
  CHECK(g->nx() == 9);
  CHECK(g->ny() == 5);
  CHECK(g->index(3, 2) == 21);
  CHECK(g->node(21).x == 0.375);
  CHECK(g->node(21).y == 0.25);
  // open set: boundary nodes are outside
  CHECK_FALSE(g->inside(g->index(0, 2)));
  CHECK(g->inside(g->index(1, 1)));
  CHECK(g->inside_count() == 7 * 3);
  double area = 0.0;
  for (double w : g->weights()) area += w;
  CHECK(area == Approx(0.5).epsilon(1e-14));
  // edge node keeps half its dual cell, corner node a quarter
  CHECK(g->weight(g->index(0, 2)) == Approx(0.125 * 0.125 / 2));
  CHECK(g->weight(g->index(0, 0)) == Approx(0.125 * 0.125 / 4));
}

TEST_CASE("disk weights sum to the area") {
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const GridPtr g = make_grid(Domain::disk({0.1, -0.2}, 1.0, h, h));
    double area = 0.0;
    for (double w : g->weights()) area += w;
    // cut cells are sub-sampled 16 x 16: at most one sub-cell row of error along the perimeter
    CHECK(std::abs(area - std::numbers::pi) <= 2 * std::numbers::pi * h / 16);
  }
}

TEST_CASE("domains with holes") {
  const Domain d = Domain::with_holes(Rect{{-1, 1, -1, 1}}, {Disk{{0, 0}, 0.5}}, 1.0 / 8);
  CHECK(d.area() == Approx(4 - std::numbers::pi / 4));
  CHECK_FALSE(d.contains({0.1, 0.1}));
  CHECK(d.contains({0.8, 0.0}));
  CHECK(d.filled().contains({0.1, 0.1}));
  CHECK(d.signed_distance({0.75, 0}) == Approx(-0.25));
  CHECK_THROWS_AS(Domain::with_holes(Rect{{-1, 1, -1, 1}}, {Disk{{0.9, 0}, 0.5}}, 0.125), Error);
}

TEST_CASE("interpolation is exact for bilinear functions") {
  const GridPtr g = make_grid(Domain::rectangle({0, 1, 0, 1}, 0.25));
  ScalarField f(g);
  for (std::size_t k = 0; k < g->size(); ++k) {
    const Point p = g->node(k);
    f[k] = 1 + 2 * p.x - p.y + 3 * p.x * p.y;
  }
  CHECK(f({0.3, 0.7}) == Approx(1 + 0.6 - 0.7 + 3 * 0.21));
  CHECK_THROWS_AS(f({1.5, 0.5}), Error);
  CHECK(square_fraction_in(g->domain(), {0, 0.5}, 0.5) == Approx(0.5));
}
