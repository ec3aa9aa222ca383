// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#ifndef BOOST_ALLOW_DEPRECATED_HEADERS
#define BOOST_ALLOW_DEPRECATED_HEADERS
#endif
#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace morpholcz::geom {

namespace bg = boost::geometry;

// Cartesian, projected metres. Boost default: clockwise outer rings, closed.
using Point = bg::model::d2::point_xy<double>;
using Ring = bg::model::ring<Point>;
using Polygon = bg::model::polygon<Point>;
using MultiPolygon = bg::model::multi_polygon<Polygon>;
using LineString = bg::model::linestring<Point>;
using MultiLineString = bg::model::multi_linestring<LineString>;
using Box = bg::model::box<Point>;

struct Segment {
  Point a;
  Point b;
};

inline double sq(double v) { return v * v; }
inline double dist(const Point& a, const Point& b) {
  return std::sqrt(sq(a.x() - b.x()) + sq(a.y() - b.y()));
}

/// Smallest circle containing every point (iterative Welzl with a fixed
/// shuffle so results are reproducible).
struct Circle {
  Point center{0.0, 0.0};
  double radius = 0.0;
};
Circle min_enclosing_circle(std::span<const Point> pts);

/// Minimum-area rectangle enclosing the points (rotating calipers over the
/// convex hull). `long_side_deg` is the azimuth of the longer side measured
/// counter-clockwise from +x, folded to [0, 180).
struct RotatedRect {
  std::array<Point, 4> corners{};
  double long_side = 0.0;
  double short_side = 0.0;
  double long_side_deg = 0.0;
  double area() const { return long_side * short_side; }
  double perimeter() const { return 2.0 * (long_side + short_side); }
};
RotatedRect min_rotated_rectangle(std::span<const Point> pts);

std::vector<Point> exterior_points(const Polygon& p);
std::vector<Point> exterior_points(const MultiPolygon& mp);

double convex_hull_area(std::span<const Point> pts);

/// Normalise orientation/closure, drop repeated vertices; self-intersections
/// are resolved with the even-odd rule. May split into several parts.
MultiPolygon make_valid(const Polygon& p);

/// A point strictly inside the polygon (centroid if it qualifies, otherwise a
/// scanline midpoint through the widest interior interval).
Point interior_point(const Polygon& p);
Point centroid(const Polygon& p);
Point centroid(const MultiPolygon& mp);

/// Even-odd point-in-polygon over every ring (boundary points are undefined).
bool inside(const Point& q, const Polygon& p);
bool inside_ring(const Point& q, const Ring& r);

/// Inward offset by `d` metres; empty optional if the polygon vanishes.
std::optional<MultiPolygon> shrink(const Polygon& p, double d);

/// Points spaced at most `step` apart along a closed ring (vertices kept).
std::vector<Point> densify(const Ring& r, double step);

/// Minimum Euclidean distance between polygon boundaries, 0 when they
/// intersect. Uses the vectorised point-to-segment kernels.
double polygon_distance(const Polygon& a, const Polygon& b);
double polygon_distance(const MultiPolygon& a, const MultiPolygon& b);

/// Length of boundary shared (collinear overlap within `tol`) between two
/// polygons' rings.
double shared_boundary_length(const Polygon& a, const Polygon& b, double tol = 1e-6);

std::vector<Segment> ring_segments(const Ring& r);
std::vector<Segment> polygon_segments(const Polygon& p);

double line_length(const LineString& l);

/// Sum of interior ring areas.
double holes_area(const Polygon& p);

Box envelope(const Polygon& p);
Box envelope(const MultiPolygon& p);
Box envelope(const LineString& l);
Box expand(const Box& b, double by);

MultiPolygon to_multi(const Polygon& p);

}  // namespace morpholcz::geom
