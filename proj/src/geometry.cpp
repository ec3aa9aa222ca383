// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "morpholcz/kernels.hpp"
#include "morpholcz/planar.hpp"

namespace morpholcz::geom {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

Circle circle2(const Point& a, const Point& b) {
  Point c((a.x() + b.x()) / 2.0, (a.y() + b.y()) / 2.0);
  return {c, dist(a, b) / 2.0};
}

Circle circle3(const Point& a, const Point& b, const Point& c) {
  const double bx = b.x() - a.x(), by = b.y() - a.y();
  const double cx = c.x() - a.x(), cy = c.y() - a.y();
  const double d = 2.0 * (bx * cy - by * cx);
  if (std::abs(d) < 1e-300) {
    Circle best = circle2(a, b);
    for (const auto& cand : {circle2(a, c), circle2(b, c)}) {
      if (cand.radius > best.radius) best = cand;
    }
    return best;
  }
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  const double ux = (cy * b2 - by * c2) / d;
  const double uy = (bx * c2 - cx * b2) / d;
  return {Point(a.x() + ux, a.y() + uy), std::sqrt(ux * ux + uy * uy)};
}

bool in_circle(const Circle& c, const Point& p) {
  return dist(c.center, p) <= c.radius * (1.0 + 1e-12) + 1e-12;
}

std::vector<Point> hull_of(std::span<const Point> pts) {
  // Andrew's monotone chain; returns CCW hull without repeated closing point.
  std::vector<Point> p(pts.begin(), pts.end());
  std::sort(p.begin(), p.end(), [](const Point& a, const Point& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  p.erase(std::unique(p.begin(), p.end(),
                      [](const Point& a, const Point& b) { return a.x() == b.x() && a.y() == b.y(); }),
          p.end());
  if (p.size() < 3) return p;
  std::vector<Point> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i - 1]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  h.resize(k - 1);
  return h;
}

double shoelace(const std::vector<Point>& ring) {
  double a = 0.0;
  for (std::size_t i = 0, n = ring.size(); i < n; ++i) {
    const Point& p = ring[i];
    const Point& q = ring[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return a / 2.0;
}

void drop_repeats(Ring& r) {
  Ring out;
  for (const auto& p : r) {
    if (out.empty() || out.back().x() != p.x() || out.back().y() != p.y()) out.push_back(p);
  }
  if (out.size() > 1 && (out.front().x() != out.back().x() || out.front().y() != out.back().y())) {
    out.push_back(out.front());
  }
  r = std::move(out);
}

}  // namespace

Circle min_enclosing_circle(std::span<const Point> pts_in) {
  std::vector<Point> pts(pts_in.begin(), pts_in.end());
  if (pts.empty()) return {};
  std::mt19937 rng(7);
  for (std::size_t i = pts.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(pts[i - 1], pts[pick(rng)]);
  }
  Circle c{pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (in_circle(c, pts[i])) continue;
    c = {pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (in_circle(c, pts[j])) continue;
      c = circle2(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (in_circle(c, pts[k])) continue;
        c = circle3(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

RotatedRect min_rotated_rectangle(std::span<const Point> pts) {
  RotatedRect best;
  const auto h = hull_of(pts);
  if (h.empty()) return best;
  if (h.size() < 3) {
    const Point& a = h.front();
    const Point& b = h.back();
    best.long_side = dist(a, b);
    best.short_side = 0.0;
    double ang = std::atan2(b.y() - a.y(), b.x() - a.x()) * 180.0 / M_PI;
    best.long_side_deg = std::fmod(ang + 360.0, 180.0);
    best.corners = {a, b, b, a};
    return best;
  }
  double best_area = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Point& a = h[i];
    const Point& b = h[(i + 1) % h.size()];
    const double len = dist(a, b);
    if (len == 0.0) continue;
    const double ux = (b.x() - a.x()) / len, uy = (b.y() - a.y()) / len;
    const double vx = -uy, vy = ux;
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : h) {
      const double pu = (p.x() - a.x()) * ux + (p.y() - a.y()) * uy;
      const double pv = (p.x() - a.x()) * vx + (p.y() - a.y()) * vy;
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double w = umax - umin, hgt = vmax - vmin;
    const double area = w * hgt;
    if (area < best_area * (1.0 - 1e-12)) {
      best_area = area;
      auto corner = [&](double u, double v) {
        return Point(a.x() + u * ux + v * vx, a.y() + u * uy + v * vy);
      };
      best.corners = {corner(umin, vmin), corner(umax, vmin), corner(umax, vmax), corner(umin, vmax)};
      double dir_x = ux, dir_y = uy;
      if (w >= hgt) {
        best.long_side = w;
        best.short_side = hgt;
      } else {
        best.long_side = hgt;
        best.short_side = w;
        dir_x = vx;
        dir_y = vy;
      }
      double ang = std::atan2(dir_y, dir_x) * 180.0 / M_PI;
      ang = std::fmod(ang + 360.0, 180.0);
      if (ang >= 180.0 - 1e-12) ang = 0.0;
      best.long_side_deg = ang;
    }
  }
  return best;
}

std::vector<Point> exterior_points(const Polygon& p) {
  std::vector<Point> out(p.outer().begin(), p.outer().end());
  if (out.size() > 1) out.pop_back();
  return out;
}

std::vector<Point> exterior_points(const MultiPolygon& mp) {
  std::vector<Point> out;
  for (const auto& p : mp) {
    auto e = exterior_points(p);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

double convex_hull_area(std::span<const Point> pts) {
  const auto h = hull_of(pts);
  if (h.size() < 3) return 0.0;
  return std::abs(shoelace(h));
}

bool inside_ring(const Point& q, const Ring& r) {
  bool in = false;
  const std::size_t n = r.size();
  if (n < 3) return false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = r[i];
    const Point& b = r[j];
    if ((a.y() > q.y()) != (b.y() > q.y())) {
      const double x = a.x() + (q.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (q.x() < x) in = !in;
    }
  }
  return in;
}

bool inside(const Point& q, const Polygon& p) {
  bool in = inside_ring(q, p.outer());
  for (const auto& h : p.inners()) {
    if (inside_ring(q, h)) in = !in;
  }
  return in;
}

MultiPolygon make_valid(const Polygon& in) {
  Polygon p = in;
  drop_repeats(p.outer());
  for (auto& r : p.inners()) drop_repeats(r);
  p.inners().erase(std::remove_if(p.inners().begin(), p.inners().end(),
                                  [](const Ring& r) { return r.size() < 4; }),
                   p.inners().end());
  MultiPolygon out;
  if (p.outer().size() < 4) return out;
  bg::correct(p);
  if (bg::is_valid(p)) {
    if (bg::area(p) > 0.0) out.push_back(p);
    return out;
  }
  // Self-intersecting: rebuild from the arrangement of all rings, keeping
  // faces inside by the even-odd rule.
  std::vector<Segment> segs = polygon_segments(p);
  auto faces = polygonize(segs);
  for (auto& f : faces) {
    const Point ip = interior_point(f);
    if (!inside(ip, in)) continue;
    if (out.empty()) {
      out.push_back(f);
      continue;
    }
    MultiPolygon merged;
    bg::union_(out, f, merged);
    out = std::move(merged);
  }
  return out;
}

Point centroid(const Polygon& p) {
  Point c(0.0, 0.0);
  try {
    bg::centroid(p, c);
  } catch (const bg::centroid_exception&) {
    if (!p.outer().empty()) c = p.outer().front();
  }
  return c;
}

Point centroid(const MultiPolygon& mp) {
  Point c(0.0, 0.0);
  try {
    bg::centroid(mp, c);
  } catch (const bg::centroid_exception&) {
    if (!mp.empty() && !mp.front().outer().empty()) c = mp.front().outer().front();
  }
  return c;
}

Point interior_point(const Polygon& p) {
  const Point c = centroid(p);
  auto on_edge_clear = [&](const Point& q) {
    // Reject points numerically on the boundary.
    kernels::SegmentSoA soa;
    for (const auto& s : polygon_segments(p)) soa.push(s.a.x(), s.a.y(), s.b.x(), s.b.y());
    return kernels::min_point_segment_dist2(q.x(), q.y(), soa) > 1e-18;
  };
  if (inside(c, p) && on_edge_clear(c)) return c;

  std::vector<double> ys;
  for (const auto& q : p.outer()) ys.push_back(q.y());
  for (const auto& r : p.inners())
    for (const auto& q : r) ys.push_back(q.y());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  const auto segs = polygon_segments(p);
  double best_w = -1.0;
  Point best = c;
  const double ymid = (ys.front() + ys.back()) / 2.0;
  std::vector<std::size_t> order(ys.size() > 0 ? ys.size() - 1 : 0);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs((ys[a] + ys[a + 1]) / 2 - ymid) < std::abs((ys[b] + ys[b + 1]) / 2 - ymid);
  });
  if (order.size() > 32) order.resize(32);
  for (std::size_t k : order) {
    const double y = (ys[k] + ys[k + 1]) / 2.0;
    std::vector<double> xs;
    for (const auto& s : segs) {
      if ((s.a.y() > y) != (s.b.y() > y)) {
        xs.push_back(s.a.x() + (y - s.a.y()) * (s.b.x() - s.a.x()) / (s.b.y() - s.a.y()));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      const double w = xs[i + 1] - xs[i];
      if (w > best_w) {
        best_w = w;
        best = Point((xs[i] + xs[i + 1]) / 2.0, y);
      }
    }
  }
  return best;
}

std::optional<MultiPolygon> shrink(const Polygon& p, double d) {
  if (d <= 0.0) return to_multi(p);
  bg::strategy::buffer::distance_symmetric<double> dist_strategy(-d);
  bg::strategy::buffer::join_miter join;
  bg::strategy::buffer::end_flat end;
  bg::strategy::buffer::point_square point;
  bg::strategy::buffer::side_straight side;
  MultiPolygon out;
  bg::buffer(to_multi(p), out, dist_strategy, side, join, end, point);
  MultiPolygon kept;
  for (auto& part : out) {
    if (bg::area(part) > 1e-9) kept.push_back(std::move(part));
  }
  if (kept.empty()) return std::nullopt;
  return kept;
}

std::vector<Point> densify(const Ring& r, double step) {
  std::vector<Point> out;
  const std::size_t n = r.size();
  if (n == 0) return out;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Point& a = r[i];
    const Point& b = r[i + 1];
    const double len = dist(a, b);
    const auto parts = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step)));
    for (std::size_t k = 0; k < parts; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(parts);
      out.emplace_back(a.x() + t * (b.x() - a.x()), a.y() + t * (b.y() - a.y()));
    }
  }
  return out;
}

std::vector<Segment> ring_segments(const Ring& r) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    if (r[i].x() == r[i + 1].x() && r[i].y() == r[i + 1].y()) continue;
    out.push_back({r[i], r[i + 1]});
  }
  return out;
}

std::vector<Segment> polygon_segments(const Polygon& p) {
  auto out = ring_segments(p.outer());
  for (const auto& h : p.inners()) {
    auto s = ring_segments(h);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

namespace {

void append_rings(const Polygon& p, kernels::SegmentSoA& soa, std::vector<double>& xs,
                  std::vector<double>& ys) {
  for (const auto& s : polygon_segments(p)) {
    soa.push(s.a.x(), s.a.y(), s.b.x(), s.b.y());
    xs.push_back(s.a.x());
    ys.push_back(s.a.y());
  }
}

}  // namespace

double polygon_distance(const Polygon& a, const Polygon& b) {
  const Box ba = envelope(a), bb = envelope(b);
  if (!bg::disjoint(ba, bb) && bg::intersects(a, b)) return 0.0;
  kernels::SegmentSoA sa, sb;
  std::vector<double> ax, ay, bx, by;
  append_rings(a, sa, ax, ay);
  append_rings(b, sb, bx, by);
  const double d2 = std::min(kernels::min_points_segments_dist2(ax, ay, sb),
                             kernels::min_points_segments_dist2(bx, by, sa));
  return std::sqrt(d2);
}

double polygon_distance(const MultiPolygon& a, const MultiPolygon& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pa : a)
    for (const auto& pb : b) best = std::min(best, polygon_distance(pa, pb));
  return best;
}

double shared_boundary_length(const Polygon& a, const Polygon& b, double tol) {
  const auto sa = polygon_segments(a);
  const auto sb = polygon_segments(b);
  double total = 0.0;
  for (const auto& s : sa) {
    const double len = dist(s.a, s.b);
    if (len == 0.0) continue;
    const double ux = (s.b.x() - s.a.x()) / len, uy = (s.b.y() - s.a.y()) / len;
    for (const auto& t : sb) {
      auto perp = [&](const Point& q) {
        return std::abs((q.x() - s.a.x()) * uy - (q.y() - s.a.y()) * ux);
      };
      if (perp(t.a) > tol || perp(t.b) > tol) continue;
      const double p0 = (t.a.x() - s.a.x()) * ux + (t.a.y() - s.a.y()) * uy;
      const double p1 = (t.b.x() - s.a.x()) * ux + (t.b.y() - s.a.y()) * uy;
      const double lo = std::max(0.0, std::min(p0, p1));
      const double hi = std::min(len, std::max(p0, p1));
      if (hi > lo) total += hi - lo;
    }
  }
  return total;
}

double line_length(const LineString& l) { return bg::length(l); }

double holes_area(const Polygon& p) {
  double a = 0.0;
  for (const auto& r : p.inners()) a += std::abs(bg::area(r));
  return a;
}

Box envelope(const Polygon& p) { return bg::return_envelope<Box>(p); }
Box envelope(const MultiPolygon& p) { return bg::return_envelope<Box>(p); }
Box envelope(const LineString& l) { return bg::return_envelope<Box>(l); }

Box expand(const Box& b, double by) {
  return Box(Point(b.min_corner().x() - by, b.min_corner().y() - by),
             Point(b.max_corner().x() + by, b.max_corner().y() + by));
}

MultiPolygon to_multi(const Polygon& p) {
  MultiPolygon m;
  m.push_back(p);
  return m;
}

}  // namespace morpholcz::geom
