// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/tessellation.hpp"

#include <boost/geometry/index/rtree.hpp>
#include <boost/polygon/voronoi.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "morpholcz/error.hpp"
#include "morpholcz/parallel.hpp"
#include "morpholcz/planar.hpp"

namespace morpholcz {

namespace bg = geom::bg;
namespace bgi = boost::geometry::index;
namespace bp = boost::polygon;
using geom::Box;
using geom::MultiPolygon;
using geom::Point;
using geom::Polygon;
using geom::Segment;

namespace {
using BoxEntry = std::pair<Box, std::size_t>;
using BoxTree = bgi::rtree<BoxEntry, bgi::quadratic<16>>;
using PointEntry = std::pair<Point, std::size_t>;
using PointTree = bgi::rtree<PointEntry, bgi::quadratic<16>>;

void add_ring(const geom::Ring& r, std::vector<Segment>& segs) {
  for (const auto& s : geom::ring_segments(r)) segs.push_back(s);
}
}  // namespace

std::vector<Enclosure> build_enclosures(const StreetNetwork& streets, const std::vector<geom::LineString>& waterlines,
                                        const std::vector<Polygon>& waterbodies, const Polygon& study_area) {
  if (study_area.outer().size() < 4 || !(bg::area(study_area) > 0.0) || !bg::is_valid(study_area))
    throw DataError("degenerate study area");
  std::vector<Segment> segs;
  auto add_line = [&](const geom::LineString& l) {
    for (std::size_t i = 0; i + 1 < l.size(); ++i) segs.push_back({l[i], l[i + 1]});
  };
  for (const auto& s : streets.segments) add_line(s.line);
  for (const auto& w : waterlines) add_line(w);
  for (const auto& wb : waterbodies) {
    add_ring(wb.outer(), segs);
    for (const auto& r : wb.inners()) add_ring(r, segs);
  }
  add_ring(study_area.outer(), segs);
  for (const auto& r : study_area.inners()) add_ring(r, segs);

  std::vector<Enclosure> out;
  for (auto& face : geom::polygonize(segs, 1e-7)) {
    const Point ip = geom::interior_point(face);
    if (!geom::inside(ip, study_area)) continue;
    bool wet = false;
    for (const auto& wb : waterbodies)
      if (geom::inside(ip, wb)) {
        wet = true;
        break;
      }
    if (wet) continue;
    out.push_back({static_cast<std::int64_t>(out.size()), std::move(face)});
  }
  return out;
}

std::vector<std::optional<std::size_t>> assign_enclosures(const std::vector<Building>& buildings,
                                                          const std::vector<Enclosure>& enclosures) {
  BoxTree tree;
  for (std::size_t e = 0; e < enclosures.size(); ++e) tree.insert({geom::envelope(enclosures[e].polygon), e});
  std::vector<std::optional<std::size_t>> res(buildings.size());
  parallel_for(buildings.size(), [&](std::size_t b) {
    const auto& fp = buildings[b].footprint;
    std::vector<BoxEntry> hits;
    tree.query(bgi::intersects(geom::envelope(fp)), std::back_inserter(hits));
    std::sort(hits.begin(), hits.end(), [](const auto& x, const auto& y) { return x.second < y.second; });
    double best = 0.0;
    for (const auto& [box, e] : hits) {
      MultiPolygon inter;
      bg::intersection(fp, enclosures[e].polygon, inter);
      const double a = bg::area(inter);
      if (a > best) {
        best = a;
        res[b] = e;
      }
    }
  });
  return res;
}

namespace {

struct Site {
  std::int64_t x, y;
  std::size_t owner;  // index into the enclosure's building list
};

// Liang-Barsky clip of segment a-b to box; false when fully outside.
bool clip(Point& a, Point& b, const Box& box) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x() - a.x(), dy = b.y() - a.y();
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x() - box.min_corner().x(), box.max_corner().x() - a.x(), a.y() - box.min_corner().y(),
                       box.max_corner().y() - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      if (t > t1) return false;
      t0 = std::max(t0, t);
    } else {
      if (t < t0) return false;
      t1 = std::min(t1, t);
    }
  }
  const Point na(a.x() + t0 * dx, a.y() + t0 * dy);
  const Point nb(a.x() + t1 * dx, a.y() + t1 * dy);
  a = na;
  b = nb;
  return true;
}

MultiPolygon union_all(std::vector<Polygon> parts) {
  if (parts.empty()) return {};
  std::vector<MultiPolygon> layer;
  for (auto& p : parts) layer.push_back(geom::to_multi(p));
  while (layer.size() > 1) {
    std::vector<MultiPolygon> next;
    for (std::size_t i = 0; i + 1 < layer.size(); i += 2) {
      MultiPolygon u;
      bg::union_(layer[i], layer[i + 1], u);
      next.push_back(std::move(u));
    }
    if (layer.size() % 2) next.push_back(std::move(layer.back()));
    layer = std::move(next);
  }
  return layer.front();
}

// Cells for the buildings of one enclosure, in the order of `members`.
std::vector<MultiPolygon> cells_in_enclosure(const Polygon& enclosure, const std::vector<Polygon>& footprints,
                                             const TessellationConfig& cfg, std::vector<bool>& fallback) {
  const std::size_t nb = footprints.size();
  fallback.assign(nb, false);
  if (nb == 1) return {geom::to_multi(enclosure)};

  const Box box = geom::envelope(enclosure);
  const double ox = box.min_corner().x(), oy = box.min_corner().y();
  constexpr double kScale = 1000.0;  // millimetre integer lattice
  std::vector<Site> sites;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> seen;
  auto add_site = [&](const Point& p, std::size_t owner) {
    const auto x = static_cast<std::int64_t>(std::llround((p.x() - ox) * kScale));
    const auto y = static_cast<std::int64_t>(std::llround((p.y() - oy) * kScale));
    if (seen.emplace(std::make_pair(x, y), owner).second) sites.push_back({x, y, owner});
  };
  for (std::size_t b = 0; b < nb; ++b) {
    auto shrunk = geom::shrink(footprints[b], cfg.shrink);
    if (!shrunk || shrunk->empty()) {
      fallback[b] = true;
      add_site(geom::centroid(footprints[b]), b);
      continue;
    }
    for (const auto& part : *shrunk) {
      for (const auto& p : geom::densify(part.outer(), cfg.segment_len)) add_site(p, b);
      for (const auto& r : part.inners())
        for (const auto& p : geom::densify(r, cfg.segment_len)) add_site(p, b);
    }
  }

  std::vector<bp::point_data<std::int64_t>> bpts;
  bpts.reserve(sites.size());
  for (const auto& s : sites) bpts.emplace_back(s.x, s.y);
  bp::voronoi_diagram<double> vd;
  bp::construct_voronoi(bpts.begin(), bpts.end(), &vd);

  const Box clip_box = geom::expand(box, 1.0);
  const double side = std::max(box.max_corner().x() - ox, box.max_corner().y() - oy) * kScale * 4.0 + 1e4;
  std::vector<Segment> segs;
  for (const auto& e : vd.edges()) {
    if (!e.is_primary()) continue;
    const std::size_t c1 = e.cell()->source_index();
    const std::size_t c2 = e.twin()->cell()->source_index();
    if (c1 > c2 || sites[c1].owner == sites[c2].owner) continue;
    double x0, y0, x1, y1;
    const double p1x = static_cast<double>(sites[c1].x), p1y = static_cast<double>(sites[c1].y);
    const double p2x = static_cast<double>(sites[c2].x), p2y = static_cast<double>(sites[c2].y);
    const double mx = (p1x + p2x) / 2.0, my = (p1y + p2y) / 2.0;
    const double dx = p1y - p2y, dy = p2x - p1x;
    const double k = side / std::max(std::abs(dx), std::abs(dy));
    if (e.vertex0()) {
      x0 = e.vertex0()->x();
      y0 = e.vertex0()->y();
    } else {
      x0 = mx - dx * k;
      y0 = my - dy * k;
    }
    if (e.vertex1()) {
      x1 = e.vertex1()->x();
      y1 = e.vertex1()->y();
    } else {
      x1 = mx + dx * k;
      y1 = my + dy * k;
    }
    Point a(x0 / kScale + ox, y0 / kScale + oy), b(x1 / kScale + ox, y1 / kScale + oy);
    if (!clip(a, b, clip_box)) continue;
    if (geom::dist(a, b) <= 1e-9) continue;
    segs.push_back({a, b});
  }
  add_ring(enclosure.outer(), segs);
  for (const auto& r : enclosure.inners()) add_ring(r, segs);

  PointTree site_tree;
  {
    std::vector<PointEntry> entries;
    entries.reserve(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i)
      entries.push_back({Point(sites[i].x / kScale + ox, sites[i].y / kScale + oy), i});
    site_tree = PointTree(entries.begin(), entries.end());
  }

  std::vector<std::vector<Polygon>> parts(nb);
  for (auto& face : geom::polygonize(segs, 1e-7)) {
    const Point ip = geom::interior_point(face);
    if (!geom::inside(ip, enclosure)) continue;
    std::vector<PointEntry> nn;
    site_tree.query(bgi::nearest(ip, 1), std::back_inserter(nn));
    if (nn.empty()) continue;
    parts[sites[nn.front().second].owner].push_back(std::move(face));
  }
  std::vector<MultiPolygon> cells(nb);
  for (std::size_t b = 0; b < nb; ++b) cells[b] = union_all(std::move(parts[b]));
  return cells;
}

}  // namespace

std::vector<EtcCell> tessellate(const std::vector<Building>& buildings, const std::vector<Enclosure>& enclosures,
                                const TessellationConfig& cfg, TessellationLog* log) {
  const auto owner = assign_enclosures(buildings, enclosures);
  std::vector<std::vector<std::size_t>> members(enclosures.size());
  for (std::size_t b = 0; b < buildings.size(); ++b) {
    if (owner[b])
      members[*owner[b]].push_back(b);
    else if (log)
      log->outside.push_back(buildings[b].id);
  }
  std::vector<MultiPolygon> cell_of(buildings.size());
  std::vector<char> fell_back(buildings.size(), 0);
  parallel_for(enclosures.size(), [&](std::size_t e) {
    if (members[e].empty()) return;
    std::vector<Polygon> fps;
    for (std::size_t b : members[e]) {
      // Clip to the enclosure so generators never leave it.
      MultiPolygon clipped;
      bg::intersection(buildings[b].footprint, enclosures[e].polygon, clipped);
      const Polygon* best = nullptr;
      for (const auto& p : clipped)
        if (!best || bg::area(p) > bg::area(*best)) best = &p;
      fps.push_back(best ? *best : buildings[b].footprint);
    }
    std::vector<bool> fb;
    auto cells = cells_in_enclosure(enclosures[e].polygon, fps, cfg, fb);
    for (std::size_t k = 0; k < members[e].size(); ++k) {
      cell_of[members[e][k]] = std::move(cells[k]);
      fell_back[members[e][k]] = fb[k];
    }
  });
  std::vector<EtcCell> out;
  for (std::size_t b = 0; b < buildings.size(); ++b) {
    if (!owner[b]) continue;
    if (fell_back[b] && log) log->centroid_fallback.push_back(buildings[b].id);
    if (cell_of[b].empty()) continue;
    EtcCell c;
    c.id = buildings[b].id;
    c.building_id = buildings[b].id;
    c.enclosure_id = enclosures[*owner[b]].id;
    c.polygon = std::move(cell_of[b]);
    out.push_back(std::move(c));
  }
  return out;
}

void link_elements(std::vector<EtcCell>& cells, const std::vector<Building>& buildings, const StreetNetwork& network,
                   const StreetGraph& graph, double snap_tol) {
  if (network.segments.empty()) {
    for (auto& c : cells) c.nearest_street_id = c.nearest_node_id = c.nearest_edge_id = std::nullopt;
    return;
  }
  std::map<std::int64_t, std::size_t> bidx;
  for (std::size_t i = 0; i < buildings.size(); ++i) bidx[buildings[i].id] = i;
  BoxTree street_tree;
  for (std::size_t s = 0; s < network.segments.size(); ++s)
    street_tree.insert({geom::envelope(network.segments[s].line), s});
  PointTree node_tree;
  for (std::size_t n = 0; n < graph.nodes.size(); ++n) node_tree.insert({graph.nodes[n], n});

  parallel_for(cells.size(), [&](std::size_t ci) {
    auto& cell = cells[ci];
    const auto it = bidx.find(cell.building_id);
    if (it == bidx.end()) return;
    const Polygon& fp = buildings[it->second].footprint;
    const Box env = geom::envelope(fp);

    // Seed a search radius from the envelope-nearest streets, then take every
    // street that could be within it.
    std::vector<BoxEntry> hits;
    street_tree.query(bgi::nearest(env, 4), std::back_inserter(hits));
    double radius = std::numeric_limits<double>::infinity();
    for (const auto& [box, s] : hits) radius = std::min(radius, bg::distance(network.segments[s].line, fp));
    hits.clear();
    street_tree.query(bgi::intersects(geom::expand(env, radius + snap_tol)), std::back_inserter(hits));
    std::vector<std::pair<double, std::size_t>> d;
    for (const auto& [box, s] : hits) d.emplace_back(bg::distance(network.segments[s].line, fp), s);
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& x : d) dmin = std::min(dmin, x.first);
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (const auto& [dd, s] : d)
      if (dd <= dmin + snap_tol) best = std::min(best, network.segments[s].id);
    cell.nearest_street_id = best;
    cell.nearest_edge_id = best;

    if (!graph.nodes.empty()) {
      std::vector<PointEntry> nn;
      node_tree.query(bgi::nearest(geom::centroid(fp), 4), std::back_inserter(nn));
      double r = std::numeric_limits<double>::infinity();
      for (const auto& [p, n] : nn) r = std::min(r, bg::distance(p, fp));
      nn.clear();
      node_tree.query(bgi::intersects(geom::expand(env, r + snap_tol)), std::back_inserter(nn));
      double nmin = std::numeric_limits<double>::infinity();
      std::vector<std::pair<double, std::size_t>> nd;
      for (const auto& [p, n] : nn) {
        nd.emplace_back(bg::distance(p, fp), n);
        nmin = std::min(nmin, nd.back().first);
      }
      std::size_t bn = graph.nodes.size();
      for (const auto& [dd, n] : nd)
        if (dd <= nmin + snap_tol) bn = std::min(bn, n);
      cell.nearest_node_id = static_cast<std::int64_t>(bn);
    }
  });
}

}  // namespace morpholcz
