// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "metric_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace oracle {

namespace bg = boost::geometry;
using morpholcz::Building;
using morpholcz::EtcCell;
using morpholcz::kMissing;
using morpholcz::geom::LineString;
using morpholcz::geom::MultiPolygon;
using morpholcz::geom::Point;
using morpholcz::geom::Polygon;
using morpholcz::geom::Ring;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTouch = 1e-6;

double dist(const Point& a, const Point& b) { return std::hypot(a.x() - b.x(), a.y() - b.y()); }
double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// ---- rings ----

std::vector<Point> open_ring(const Ring& r) {
  std::vector<Point> p(r.begin(), r.end());
  if (p.size() > 1 && p.front().x() == p.back().x() && p.front().y() == p.back().y()) p.pop_back();
  return p;
}

double signed_area(const std::vector<Point>& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point& a = p[i];
    const Point& b = p[(i + 1) % p.size()];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return s / 2;
}

double ring_length(const std::vector<Point>& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += dist(p[i], p[(i + 1) % p.size()]);
  return s;
}

struct Seg {
  Point a, b;
};

std::vector<Seg> segments(const MultiPolygon& g) {
  std::vector<Seg> out;
  auto add = [&](const Ring& r) {
    const auto p = open_ring(r);
    for (std::size_t i = 0; i < p.size(); ++i) out.push_back({p[i], p[(i + 1) % p.size()]});
  };
  for (const auto& poly : g) {
    add(poly.outer());
    for (const auto& in : poly.inners()) add(in);
  }
  return out;
}

MultiPolygon multi(const Polygon& p) { return MultiPolygon{p}; }

double area(const MultiPolygon& g) {
  double a = 0;
  for (const auto& p : g) {
    a += std::abs(signed_area(open_ring(p.outer())));
    for (const auto& in : p.inners()) a -= std::abs(signed_area(open_ring(in)));
  }
  return a;
}

double holes(const Polygon& p) {
  double a = 0;
  for (const auto& in : p.inners()) a += std::abs(signed_area(open_ring(in)));
  return a;
}

// Area centroid from the triangle-fan formula, outer rings counted positive
// and holes negative whatever their stored orientation.
Point centroid(const MultiPolygon& g) {
  double sa = 0, sx = 0, sy = 0;
  auto ring = [&](const std::vector<Point>& p, double sign) {
    const double s = signed_area(p) >= 0 ? sign : -sign;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Point& a = p[i];
      const Point& b = p[(i + 1) % p.size()];
      const double c = (a.x() * b.y() - b.x() * a.y()) * s;
      sa += c;
      sx += (a.x() + b.x()) * c;
      sy += (a.y() + b.y()) * c;
    }
  };
  for (const auto& p : g) {
    ring(open_ring(p.outer()), 1.0);
    for (const auto& in : p.inners()) ring(open_ring(in), -1.0);
  }
  return Point(sx / (3 * sa), sy / (3 * sa));
}

// ---- hull, rectangle, circle ----

// Gift wrapping; collinear points are skipped in favour of the farthest.
std::vector<Point> hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point& a, const Point& b) { return a.x() == b.x() && a.y() == b.y(); }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> h;
  std::size_t p = 0;
  for (std::size_t guard = 0; guard <= pts.size(); ++guard) {
    h.push_back(pts[p]);
    std::size_t q = (p + 1) % pts.size();
    for (std::size_t r = 0; r < pts.size(); ++r) {
      if (r == p) continue;
      const double c = cross(pts[p], pts[q], pts[r]);
      if (c < 0 || (c == 0 && dist(pts[p], pts[r]) > dist(pts[p], pts[q]))) q = r;
    }
    p = q;
    if (p == 0) break;
  }
  return h;
}

struct Rect {
  double area = kInf, long_side = 0, short_side = 0, deg = 0;
};

// Minimum-area rectangle: one side lies on a hull edge, so trying every edge
// direction is exhaustive.
Rect min_rect(const std::vector<Point>& h) {
  Rect best;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Point& a = h[i];
    const Point& b = h[(i + 1) % h.size()];
    const double len = dist(a, b);
    if (len == 0) continue;
    const double ux = (b.x() - a.x()) / len, uy = (b.y() - a.y()) / len;
    double lo_u = kInf, hi_u = -kInf, lo_v = kInf, hi_v = -kInf;
    for (const auto& p : h) {
      const double pu = p.x() * ux + p.y() * uy, pv = -p.x() * uy + p.y() * ux;
      lo_u = std::min(lo_u, pu), hi_u = std::max(hi_u, pu);
      lo_v = std::min(lo_v, pv), hi_v = std::max(hi_v, pv);
    }
    const double w = hi_u - lo_u, hgt = hi_v - lo_v;
    if (w * hgt < best.area) {
      best.area = w * hgt;
      best.long_side = std::max(w, hgt);
      best.short_side = std::min(w, hgt);
      const double dx = w >= hgt ? ux : -uy, dy = w >= hgt ? uy : ux;
      double deg = std::atan2(dy, dx) * 180 / M_PI;
      while (deg < 0) deg += 90;
      while (deg >= 90) deg -= 90;
      best.deg = deg;
    }
  }
  return best;
}

// Smallest circle through two or three hull points that holds every point.
double enclosing_diameter(const std::vector<Point>& h) {
  if (h.size() == 1) return 0;
  auto holds = [&](const Point& c, double r) {
    for (const auto& p : h)
      if (dist(p, c) > r * (1 + 1e-12) + 1e-9) return false;
    return true;
  };
  double best = kInf;
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = i + 1; j < h.size(); ++j) {
      const Point c((h[i].x() + h[j].x()) / 2, (h[i].y() + h[j].y()) / 2);
      const double r = dist(h[i], h[j]) / 2;
      if (r < best && holds(c, r)) best = r;
    }
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = i + 1; j < h.size(); ++j)
      for (std::size_t k = j + 1; k < h.size(); ++k) {
        const Point &a = h[i], &b = h[j], &c = h[k];
        const double d = 2 * (a.x() * (b.y() - c.y()) + b.x() * (c.y() - a.y()) + c.x() * (a.y() - b.y()));
        if (std::abs(d) < 1e-12) continue;
        const double a2 = a.x() * a.x() + a.y() * a.y(), b2 = b.x() * b.x() + b.y() * b.y(),
                     c2 = c.x() * c.x() + c.y() * c.y();
        const Point o((a2 * (b.y() - c.y()) + b2 * (c.y() - a.y()) + c2 * (a.y() - b.y())) / d,
                      (a2 * (c.x() - b.x()) + b2 * (a.x() - c.x()) + c2 * (b.x() - a.x())) / d);
        const double r = dist(o, a);
        if (r < best && holds(o, r)) best = r;
      }
  return 2 * best;
}

// ---- distances between boundaries ----

double point_seg(const Point& p, const Seg& s) {
  const double dx = s.b.x() - s.a.x(), dy = s.b.y() - s.a.y();
  const double l2 = dx * dx + dy * dy;
  double t = l2 > 0 ? ((p.x() - s.a.x()) * dx + (p.y() - s.a.y()) * dy) / l2 : 0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x() - (s.a.x() + t * dx), p.y() - (s.a.y() + t * dy));
}

bool crosses(const Seg& s, const Seg& t) {
  const double d1 = cross(s.a, s.b, t.a), d2 = cross(s.a, s.b, t.b);
  const double d3 = cross(t.a, t.b, s.a), d4 = cross(t.a, t.b, s.b);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

double seg_seg(const Seg& s, const Seg& t) {
  if (crosses(s, t)) return 0;
  return std::min({point_seg(s.a, t), point_seg(s.b, t), point_seg(t.a, s), point_seg(t.b, s)});
}

double boundary_distance(const std::vector<Seg>& a, const std::vector<Seg>& b) {
  double best = kInf;
  for (const auto& s : a)
    for (const auto& t : b) best = std::min(best, seg_seg(s, t));
  return best;
}

// Length over which two boundaries run along each other.
double shared_length(const std::vector<Seg>& a, const std::vector<Seg>& b) {
  double total = 0;
  for (const auto& s : a) {
    const double len = dist(s.a, s.b);
    if (len == 0) continue;
    const double ux = (s.b.x() - s.a.x()) / len, uy = (s.b.y() - s.a.y()) / len;
    for (const auto& t : b) {
      auto off = [&](const Point& p) { return std::abs(-(p.x() - s.a.x()) * uy + (p.y() - s.a.y()) * ux); };
      if (off(t.a) > kTouch || off(t.b) > kTouch) continue;
      const double t0 = (t.a.x() - s.a.x()) * ux + (t.a.y() - s.a.y()) * uy;
      const double t1 = (t.b.x() - s.a.x()) * ux + (t.b.y() - s.a.y()) * uy;
      total += std::max(0.0, std::min(len, std::max(t0, t1)) - std::max(0.0, std::min(t0, t1)));
    }
  }
  return total;
}

// ---- neighbourhoods ----

double weighted(const std::vector<double>& v, const std::vector<double>& w, std::size_t i,
                const std::vector<std::size_t>& hood) {
  double num = 0, den = 0;
  for (std::size_t j : hood) {
    if (std::isnan(v[j]) || std::isnan(w[j])) continue;
    num += w[j] * v[j];
    den += w[j];
  }
  return den > 0 ? num / den : v[i];
}

std::vector<std::vector<std::size_t>> components(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& e) {
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::vector<std::size_t> stack = {s};
    label[s] = next;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (auto [a, b] : e) {
        const std::size_t w = a == v ? b : b == v ? a : n;
        if (w < n && label[w] < 0) label[w] = next, stack.push_back(w);
      }
    }
    ++next;
  }
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(next));
  for (std::size_t v = 0; v < n; ++v) out[static_cast<std::size_t>(label[v])].push_back(v);
  return out;
}

// ---- streets ----

struct Profile {
  double width = kMissing, deviation = kMissing, openness = kMissing;
};

Profile profile(const LineString& l, const std::vector<Building>& bs, const morpholcz::ProfileConfig& cfg) {
  double total = 0;
  for (std::size_t i = 0; i + 1 < l.size(); ++i) total += dist(l[i], l[i + 1]);
  Profile out;
  if (!(total > 0)) return out;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(total / cfg.tick_spacing)));
  const double half = cfg.tick_len / 2;
  std::vector<double> widths;
  int open = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = (static_cast<double>(k) + 0.5) * total / static_cast<double>(n);
    double start = 0;
    std::size_t seg = 0;
    while (seg + 2 < l.size() && start + dist(l[seg], l[seg + 1]) < s) start += dist(l[seg], l[seg + 1]), ++seg;
    const double len = dist(l[seg], l[seg + 1]);
    const double tx = (l[seg + 1].x() - l[seg].x()) / len, ty = (l[seg + 1].y() - l[seg].y()) / len;
    const Point p(l[seg].x() + tx * (s - start), l[seg].y() + ty * (s - start));
    double w = 0;
    for (double side : {1.0, -1.0}) {
      const LineString ray{p, Point(p.x() - ty * side * half, p.y() + tx * side * half)};
      double hit = kInf;
      for (const auto& b : bs) {
        std::vector<Ring> rings = {b.footprint.outer()};
        for (const auto& in : b.footprint.inners()) rings.push_back(in);
        for (const auto& r : rings) {
          std::vector<Point> pts;
          bg::intersection(ray, LineString(r.begin(), r.end()), pts);
          for (const auto& q : pts) hit = std::min(hit, dist(p, q));
        }
      }
      if (hit <= half) {
        w += hit;
      } else {
        w += half;
        ++open;
      }
    }
    widths.push_back(w);
  }
  double mean = 0;
  for (double w : widths) mean += w;
  mean /= static_cast<double>(widths.size());
  double var = 0;
  for (double w : widths) var += (w - mean) * (w - mean);
  out.width = mean;
  out.deviation = std::sqrt(var / static_cast<double>(widths.size()));
  out.openness = open / (2.0 * static_cast<double>(widths.size()));
  return out;
}

double chord_deg(const LineString& l) {
  double deg = std::atan2(l.back().y() - l.front().y(), l.back().x() - l.front().x()) * 180 / M_PI;
  while (deg < 0) deg += 90;
  while (deg >= 90) deg -= 90;
  return deg;
}

}  // namespace

Shape shape(const MultiPolygon& g) {
  Shape s;
  std::fill(&s.area, &s.orientation + 1, kMissing);
  const double a = area(g);
  if (!(a > 0)) return s;
  double p = 0;
  std::vector<Point> ext;
  for (const auto& poly : g) {
    const auto o = open_ring(poly.outer());
    p += ring_length(o);
    ext.insert(ext.end(), o.begin(), o.end());
    for (const auto& in : poly.inners()) p += ring_length(open_ring(in));
  }
  const auto h = hull(ext);
  const double l = enclosing_diameter(h);
  const Rect r = min_rect(h);
  const double rp = 2 * (r.long_side + r.short_side);
  s.area = a;
  s.perimeter = p;
  s.longest_axis = l;
  s.circular_compactness = a / (M_PI * l * l / 4);
  s.square_compactness = 16 * a / (p * p);
  s.compactness_weighted_axis = l * (4 / M_PI - 16 * a / (p * p));
  s.convexity = a / std::abs(signed_area(h));
  s.elongation = r.long_side > 0 ? r.short_side / r.long_side : kMissing;
  s.eri = r.area > 0 ? std::sqrt(a / r.area) * rp / p : kMissing;
  s.facade_ratio = a / p;
  s.fractal_dimension = std::log(a) != 0 ? 2 * std::log(p / 4) / std::log(a) : kMissing;
  s.rectangularity = r.area > 0 ? a / r.area : kMissing;
  s.shape_index = std::sqrt(a / M_PI) / (l / 2);
  s.orientation = r.deg;
  return s;
}

morpholcz::Table primary(const std::vector<Building>& bs, const std::vector<EtcCell>& cells,
                         const morpholcz::StreetNetwork& net, const morpholcz::StreetGraph& g,
                         const morpholcz::ProfileConfig& pcfg) {
  const std::size_t nb = bs.size(), nc = cells.size(), ns = net.segments.size(), nn = g.nodes.size();
  std::map<std::string, std::vector<double>> B, C, S, N;

  // ---- buildings ----
  std::vector<Shape> bsh(nb);
  std::vector<Point> bc(nb);
  std::vector<std::vector<Seg>> bseg(nb);
  std::vector<double> ba(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    bsh[i] = shape(multi(bs[i].footprint));
    bc[i] = centroid(multi(bs[i].footprint));
    bseg[i] = segments(multi(bs[i].footprint));
    ba[i] = bsh[i].area;
  }
  std::vector<std::vector<double>> D(nb, std::vector<double>(nb, 0));
  std::vector<std::pair<std::size_t, std::size_t>> touching;
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = i + 1; j < nb; ++j) {
      D[i][j] = D[j][i] = boundary_distance(bseg[i], bseg[j]);
      if (D[i][j] <= kTouch) touching.emplace_back(i, j);
    }
  auto touch = [&](std::size_t i, std::size_t j) { return i != j && D[i][j] <= kTouch; };

  auto& shared = B["bld_shared_walls"];
  shared.assign(nb, 0);
  std::vector<std::vector<double>> sh(nb, std::vector<double>(nb, 0));
  for (auto [i, j] : touching) {
    sh[i][j] = sh[j][i] = shared_length(bseg[i], bseg[j]);
    shared[i] += sh[i][j];
    shared[j] += sh[i][j];
  }
  // Perimeter of a joined block: member perimeters less twice every shared run.
  auto& wall = B["bld_perimeter_wall"];
  wall.assign(nb, 0);
  for (const auto& comp : components(nb, touching)) {
    double p = 0;
    for (std::size_t a : comp) {
      p += bsh[a].perimeter;
      for (std::size_t b : comp)
        if (b > a) p -= 2 * sh[a][b];
    }
    for (std::size_t a : comp) wall[a] = p;
  }
  for (std::size_t i = 0; i < nb; ++i) {
    const double c = holes(bs[i].footprint);
    B["bld_area"].push_back(ba[i]);
    B["bld_courtyard_area"].push_back(c);
    B["bld_courtyard_index"].push_back(c / (ba[i] + c));
  }

  auto band = [&](std::size_t i, double r, bool self) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < nb; ++j)
      if ((j == i && self) || (j != i && dist(bc[i], bc[j]) <= r)) out.push_back(j);
    return out;
  };
  const char* shapes[] = {"longest_axis", "circular_compactness", "square_compactness", "compactness_weighted_axis",
                          "convexity",    "elongation",           "eri",                "facade_ratio",
                          "fractal_dimension", "rectangularity",  "shape_index"};
  auto field = [](const std::vector<Shape>& v, std::size_t k) {
    std::vector<double> out;
    for (const auto& s : v) out.push_back((&s.longest_axis)[k]);
    return out;
  };
  for (std::size_t k = 0; k < 11; ++k) B[std::string("bld_") + shapes[k]] = field(bsh, k);

  std::map<std::int64_t, std::size_t> sidx;
  for (std::size_t s = 0; s < ns; ++s) sidx[net.segments[s].id] = s;
  auto& align = B["bld_street_alignment"];
  align.assign(nb, kMissing);
  for (const auto& c : cells) {
    std::size_t i = 0;
    while (i < nb && bs[i].id != c.building_id) ++i;
    if (i == nb || !c.nearest_street_id || std::isnan(bsh[i].orientation)) continue;
    const double x = std::fmod(std::abs(bsh[i].orientation - chord_deg(net.segments[sidx.at(*c.nearest_street_id)].line)), 90.0);
    align[i] = std::min(x, 90 - x);
  }

  for (std::size_t i = 0; i < nb; ++i) {
    const auto w100 = band(i, 100, true), w200 = band(i, 200, true);
    for (const std::string base : {"perimeter_wall", "street_alignment"}) {
      const auto& v = B["bld_" + base];
      B["bld_" + base + "_w100"].push_back(weighted(v, ba, i, w100));
      B["bld_" + base + "_w200"].push_back(weighted(v, ba, i, w200));
    }
    for (const char* s : shapes) {
      const auto& v = B[std::string("bld_") + s];
      B[std::string("bld_") + s + "_w100"].push_back(weighted(v, ba, i, w100));
      B[std::string("bld_") + s + "_w200"].push_back(weighted(v, ba, i, w200));
    }
    double ibd = 0;
    int pairs = 0;
    std::vector<std::pair<std::size_t, std::size_t>> local;
    for (std::size_t a = 0; a < w200.size(); ++a)
      for (std::size_t b = a + 1; b < w200.size(); ++b) {
        ibd += D[w200[a]][w200[b]];
        ++pairs;
        if (touch(w200[a], w200[b])) local.emplace_back(a, b);
      }
    B["bld_interbuilding_distance_d200"].push_back(pairs ? ibd / pairs : kMissing);
    B["bld_adjacency_d200"].push_back(double(components(w200.size(), local).size()) / double(w200.size()));
    for (int r : {20, 100, 200}) {
      const auto hood = band(i, r, false);
      double s = 0;
      for (std::size_t j : hood) s += dist(bc[i], bc[j]);
      B["bld_neighbors_d" + std::to_string(r)].push_back(double(hood.size()));
      B["bld_mean_dist_d" + std::to_string(r)].push_back(hood.empty() ? kMissing : s / double(hood.size()));
    }
    std::vector<double> all;
    for (std::size_t j = 0; j < nb; ++j)
      if (j != i) all.push_back(dist(bc[i], bc[j]));
    std::sort(all.begin(), all.end());
    for (std::size_t k : {10u, 20u, 30u}) {
      const std::size_t take = std::min(k, all.size());
      double s = 0;
      for (std::size_t t = 0; t < take; ++t) s += all[t];
      B["bld_mean_dist_k" + std::to_string(k)].push_back(take ? s / double(take) : kMissing);
    }
  }

  // ---- cells ----
  std::vector<Shape> csh(nc);
  std::vector<Point> cc(nc);
  std::vector<std::vector<Seg>> cseg(nc);
  std::vector<double> ca(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    csh[i] = shape(cells[i].polygon);
    cc[i] = centroid(cells[i].polygon);
    cseg[i] = segments(cells[i].polygon);
    ca[i] = csh[i].area;
  }
  std::vector<std::vector<std::size_t>> adj(nc);
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = i + 1; j < nc; ++j)
      if (boundary_distance(cseg[i], cseg[j]) <= kTouch) adj[i].push_back(j), adj[j].push_back(i);
  auto steps = [&](std::size_t s, int k) {
    std::vector<int> hop(nc, -1);
    hop[s] = 0;
    std::vector<std::size_t> frontier = {s}, out;
    for (int h = 1; h <= k; ++h) {
      std::vector<std::size_t> next;
      for (std::size_t v : frontier)
        for (std::size_t w : adj[v])
          if (hop[w] < 0) hop[w] = h, next.push_back(w), out.push_back(w);
      frontier = next;
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  for (std::size_t k = 0; k < 11; ++k) C[std::string("etc_") + shapes[k]] = field(csh, k);
  auto& car = C["etc_car"];
  for (std::size_t i = 0; i < nc; ++i) {
    std::size_t b = 0;
    while (b < nb && bs[b].id != cells[i].building_id) ++b;
    car.push_back(b < nb && ca[i] > 0 ? ba[b] / ca[i] : kMissing);
  }
  for (std::size_t i = 0; i < nc; ++i) {
    C["etc_area"].push_back(ca[i]);
    auto t3 = steps(i, 3);
    t3.push_back(i);
    for (const char* s : shapes)
      C[std::string("etc_") + s + "_wt3"].push_back(weighted(C[std::string("etc_") + s], ca, i, t3));
    C["etc_car_wt3"].push_back(weighted(car, ca, i, t3));
    double gran = ca[i];
    for (std::size_t j : steps(i, 1)) gran += ca[j];
    C["etc_granularity_t1"].push_back(gran);
    for (int k : {1, 2, 3}) {
      const auto hood = steps(i, k);
      C["etc_neighbors_t" + std::to_string(k)].push_back(double(hood.size()));
      if (k == 1) continue;
      double s = 0;
      for (std::size_t j : hood) s += dist(cc[i], cc[j]);
      C["etc_mean_dist_t" + std::to_string(k)].push_back(hood.empty() ? kMissing : s / double(hood.size()));
    }
  }

  // ---- streets ----
  for (const auto& seg : net.segments) {
    double len = 0;
    for (std::size_t i = 0; i + 1 < seg.line.size(); ++i) len += dist(seg.line[i], seg.line[i + 1]);
    S["str_length"].push_back(len);
    S["str_linearity"].push_back(len > 0 ? dist(seg.line.front(), seg.line.back()) / len : kMissing);
    const auto p = profile(seg.line, bs, pcfg);
    S["str_width"].push_back(p.width);
    S["str_width_deviation"].push_back(p.deviation);
    S["str_openness"].push_back(p.openness);
  }

  // ---- nodes ----
  std::vector<double> deg(nn, 0), inc_len(nn, 0);
  std::vector<std::vector<double>> W(nn, std::vector<double>(nn, kInf));
  std::vector<std::vector<bool>> simple(nn, std::vector<bool>(nn, false));
  for (std::size_t v = 0; v < nn; ++v) W[v][v] = 0;
  for (const auto& e : g.edges) {
    for (std::size_t end : {e.u, e.v}) deg[end] += 1, inc_len[end] += e.length;
    if (e.u == e.v) continue;
    W[e.u][e.v] = W[e.v][e.u] = std::min(W[e.u][e.v], e.length);
    simple[e.u][e.v] = simple[e.v][e.u] = true;
  }
  for (std::size_t k = 0; k < nn; ++k)
    for (std::size_t i = 0; i < nn; ++i)
      for (std::size_t j = 0; j < nn; ++j) W[i][j] = std::min(W[i][j], W[i][k] + W[k][j]);
  for (std::size_t v = 0; v < nn; ++v) {
    N["node_degree"].push_back(deg[v]);
    N["node_mean_distance"].push_back(deg[v] > 0 ? inc_len[v] / deg[v] : kMissing);
    std::vector<std::size_t> nb_v;
    for (std::size_t u = 0; u < nn; ++u)
      if (simple[v][u]) nb_v.push_back(u);
    auto kdeg = [&](std::size_t u) {
      double k = 0;
      for (std::size_t x = 0; x < nn; ++x) k += simple[u][x];
      return k;
    };
    double clus = 0, pot = 0;
    for (std::size_t a = 0; a < nb_v.size(); ++a)
      for (std::size_t b = a + 1; b < nb_v.size(); ++b) {
        const std::size_t u = nb_v[a], w = nb_v[b];
        double sq = 0;
        for (std::size_t x = 0; x < nn; ++x)
          if (x != v && simple[u][x] && simple[w][x]) sq += 1;
        clus += sq;
        const double degm = sq + 1 + (simple[u][w] ? 1 : 0);
        pot += (kdeg(u) - degm) + (kdeg(w) - degm) + sq;
      }
    N["node_clustering"].push_back(pot > 0 ? clus / pot : 0.0);
    for (int r : {5, 400}) {
      const std::string sfx = "_r" + std::to_string(r);
      std::vector<std::size_t> ego;
      for (std::size_t u = 0; u < nn; ++u)
        if (W[v][u] <= r) ego.push_back(u);
      std::map<std::size_t, std::size_t> pos;
      for (std::size_t k = 0; k < ego.size(); ++k) pos[ego[k]] = k;
      double E = 0, len = 0, cds = 0;
      std::vector<std::pair<std::size_t, std::size_t>> local;
      for (const auto& e : g.edges) {
        if (!pos.count(e.u) || !pos.count(e.v)) continue;
        E += 1;
        len += e.length;
        if (deg[e.u] == 1 || deg[e.v] == 1) cds += e.length;
        local.emplace_back(pos[e.u], pos[e.v]);
      }
      const double V = double(ego.size());
      const bool sub = ego.size() > 1;
      N["node_mean_degree" + sfx].push_back(sub ? 2 * E / V : kMissing);
      N["node_density" + sfx].push_back(sub && len > 0 ? V / len * 1000 : kMissing);
      N["node_edge_node_ratio" + sfx].push_back(sub ? E / V : kMissing);
      N["node_cds_length" + sfx].push_back(sub ? cds : kMissing);
      N["node_cyclomatic" + sfx].push_back(sub ? E - V + double(components(ego.size(), local).size()) : kMissing);
      N["node_gamma" + sfx].push_back(sub && V >= 3 ? E / (3 * (V - 2)) : kMissing);
      N["node_meshedness" + sfx].push_back(sub && V >= 3 ? (E - V + 1) / (2 * V - 5) : kMissing);
    }
  }

  // ---- one row per cell ----
  const auto& cat = morpholcz::metric_catalog();
  std::vector<std::int64_t> ids;
  std::vector<std::string> names;
  for (const auto& c : cells) ids.push_back(c.id);
  for (const auto& m : cat) names.push_back(m.name);
  morpholcz::Table t(ids, names);
  t.id_name = "cell_id";
  for (std::size_t r = 0; r < nc; ++r) {
    const auto& c = cells[r];
    std::size_t b = 0;
    while (b < nb && bs[b].id != c.building_id) ++b;
    for (std::size_t m = 0; m < cat.size(); ++m) {
      const auto& name = cat[m].name;
      double v = kMissing;
      if (B.count(name)) {
        if (b < nb) v = B[name].at(b);
      } else if (C.count(name)) {
        v = C[name].at(r);
      } else if (S.count(name)) {
        if (c.nearest_street_id) v = S[name].at(sidx.at(*c.nearest_street_id));
      } else if (N.count(name)) {
        if (c.nearest_node_id) v = N[name].at(static_cast<std::size_t>(*c.nearest_node_id));
      } else {
        throw std::logic_error("oracle lacks " + name);
      }
      t.at(r, m) = v;
    }
  }
  return t;
}

}  // namespace oracle
