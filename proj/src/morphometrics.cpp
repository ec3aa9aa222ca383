// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/morphometrics.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cstddef>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_map>

#include "morpholcz/error.hpp"
#include "morpholcz/parallel.hpp"

namespace morpholcz {

namespace bg = geom::bg;
namespace bgi = boost::geometry::index;
using geom::Box;
using geom::MultiPolygon;
using geom::Point;
using geom::Polygon;

namespace {

const char* const kShapeNames[] = {"longest_axis",   "circular_compactness", "square_compactness",
                                   "compactness_weighted_axis", "convexity", "elongation",
                                   "eri",            "facade_ratio",         "fractal_dimension",
                                   "rectangularity", "shape_index"};

std::vector<MetricInfo> build_catalog() {
  using E = Element;
  using F = Family;
  std::vector<MetricInfo> c;
  c.push_back({"bld_area", E::building, F::dimension, "none"});
  c.push_back({"etc_area", E::etc, F::dimension, "none"});
  c.push_back({"bld_courtyard_area", E::building, F::dimension, "none"});
  c.push_back({"bld_courtyard_index", E::building, F::shape, "none"});
  c.push_back({"bld_perimeter_wall", E::building, F::dimension, "none"});
  c.push_back({"bld_perimeter_wall_w100", E::building, F::dimension, "dist100"});
  c.push_back({"bld_perimeter_wall_w200", E::building, F::dimension, "dist200"});
  for (const char* s : kShapeNames) {
    const std::string n = s;
    const F fam = n == "longest_axis" ? F::dimension : F::shape;
    c.push_back({"bld_" + n, E::building, fam, "none"});
    c.push_back({"bld_" + n + "_w100", E::building, fam, "dist100"});
    c.push_back({"bld_" + n + "_w200", E::building, fam, "dist200"});
    c.push_back({"etc_" + n, E::etc, fam, "none"});
    c.push_back({"etc_" + n + "_wt3", E::etc, fam, "topo3"});
  }
  c.push_back({"bld_adjacency_d200", E::building, F::distribution, "dist200"});
  c.push_back({"bld_interbuilding_distance_d200", E::building, F::distribution, "dist200"});
  c.push_back({"bld_shared_walls", E::building, F::distribution, "none"});
  c.push_back({"bld_street_alignment", E::building, F::distribution, "none"});
  c.push_back({"bld_street_alignment_w100", E::building, F::distribution, "dist100"});
  c.push_back({"bld_street_alignment_w200", E::building, F::distribution, "dist200"});
  c.push_back({"etc_car", E::etc, F::intensity, "none"});
  c.push_back({"etc_car_wt3", E::etc, F::intensity, "topo3"});
  c.push_back({"etc_granularity_t1", E::etc, F::intensity, "topo1"});
  for (int r : {20, 100, 200})
    c.push_back({"bld_neighbors_d" + std::to_string(r), E::building, F::distribution, "dist" + std::to_string(r)});
  for (int k : {1, 2, 3})
    c.push_back({"etc_neighbors_t" + std::to_string(k), E::etc, F::distribution, "topo" + std::to_string(k)});
  for (int r : {20, 100, 200})
    c.push_back({"bld_mean_dist_d" + std::to_string(r), E::building, F::distribution, "dist" + std::to_string(r)});
  for (int k : {10, 20, 30})
    c.push_back({"bld_mean_dist_k" + std::to_string(k), E::building, F::distribution, "knn" + std::to_string(k)});
  for (int k : {2, 3})
    c.push_back({"etc_mean_dist_t" + std::to_string(k), E::etc, F::distribution, "topo" + std::to_string(k)});

  c.push_back({"str_length", E::street, F::dimension, "none"});
  c.push_back({"str_linearity", E::street, F::shape, "none"});
  c.push_back({"str_width", E::street, F::dimension, "none"});
  c.push_back({"str_width_deviation", E::street, F::dimension, "none"});
  c.push_back({"str_openness", E::street, F::distribution, "none"});
  c.push_back({"node_degree", E::node, F::connectivity, "none"});
  c.push_back({"node_mean_degree_r5", E::node, F::connectivity, "rad5"});
  c.push_back({"node_mean_degree_r400", E::node, F::connectivity, "rad400"});
  c.push_back({"node_mean_distance", E::node, F::connectivity, "none"});
  c.push_back({"node_density_r5", E::node, F::intensity, "rad5"});
  c.push_back({"node_density_r400", E::node, F::intensity, "rad400"});
  c.push_back({"node_clustering", E::node, F::connectivity, "none"});
  for (const char* n : {"edge_node_ratio", "cds_length", "cyclomatic", "gamma", "meshedness"}) {
    c.push_back({std::string("node_") + n + "_r5", E::node, F::connectivity, "rad5"});
    c.push_back({std::string("node_") + n + "_r400", E::node, F::connectivity, "rad400"});
  }
  return c;
}

}  // namespace

const std::vector<MetricInfo>& metric_catalog() {
  static const std::vector<MetricInfo> c = build_catalog();
  return c;
}

std::string to_string(Element e) {
  switch (e) {
    case Element::building: return "building";
    case Element::etc: return "etc";
    case Element::street: return "street";
    case Element::node: return "node";
  }
  return "";
}

std::string to_string(Family f) {
  switch (f) {
    case Family::dimension: return "dimension";
    case Family::shape: return "shape";
    case Family::distribution: return "distribution";
    case Family::intensity: return "intensity";
    case Family::connectivity: return "connectivity";
  }
  return "";
}

nlohmann::json catalog_json() {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : metric_catalog())
    j.push_back({{"name", m.name}, {"element", to_string(m.element)}, {"family", to_string(m.family)}, {"scale", m.scale}});
  return j;
}

// ---------- shape ----------

ShapeMetrics shape_metrics(const MultiPolygon& g) {
  ShapeMetrics m;
  const double a = bg::area(g);
  if (!(a > 0.0)) return m;
  const double p = bg::perimeter(g);
  const auto pts = geom::exterior_points(g);
  const double l = 2.0 * geom::min_enclosing_circle(pts).radius;
  const double hull = geom::convex_hull_area(pts);
  const auto mrr = geom::min_rotated_rectangle(pts);
  m.area = a;
  m.perimeter = p;
  m.longest_axis = l;
  m.circular_compactness = a / (M_PI * (l / 2.0) * (l / 2.0));
  m.square_compactness = std::pow(4.0 * std::sqrt(a) / p, 2.0);
  m.compactness_weighted_axis = l * ((4.0 / M_PI) - (16.0 * a) / (p * p));
  m.convexity = a / hull;
  m.elongation = mrr.long_side > 0.0 ? mrr.short_side / mrr.long_side : kMissing;
  m.eri = mrr.area() > 0.0 ? std::sqrt(a / mrr.area()) * (mrr.perimeter() / p) : kMissing;
  m.facade_ratio = a / p;
  const double la = std::log(a);
  m.fractal_dimension = la != 0.0 ? 2.0 * std::log(p / 4.0) / la : kMissing;
  m.rectangularity = mrr.area() > 0.0 ? a / mrr.area() : kMissing;
  m.shape_index = std::sqrt(a / M_PI) / (l / 2.0);
  m.orientation = std::fmod(mrr.long_side_deg, 90.0);
  return m;
}

ShapeMetrics shape_metrics(const Polygon& p) { return shape_metrics(geom::to_multi(p)); }

std::vector<double> area_weighted(const std::vector<double>& values, const std::vector<double>& areas,
                                  const std::vector<std::vector<std::size_t>>& hoods) {
  std::vector<double> out(values.size(), kMissing);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t j : hoods[i]) {
      if (missing(values[j]) || missing(areas[j])) continue;
      num += areas[j] * values[j];
      den += areas[j];
    }
    out[i] = den > 0.0 ? num / den : values[i];
  }
  return out;
}

std::vector<std::vector<std::size_t>> distance_band(const std::vector<Point>& c, double radius) {
  using Entry = std::pair<Point, std::size_t>;
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < c.size(); ++i) entries.push_back({c[i], i});
  bgi::rtree<Entry, bgi::quadratic<16>> tree(entries.begin(), entries.end());
  std::vector<std::vector<std::size_t>> out(c.size());
  parallel_for(c.size(), [&](std::size_t i) {
    const Box q(Point(c[i].x() - radius, c[i].y() - radius), Point(c[i].x() + radius, c[i].y() + radius));
    std::vector<Entry> hits;
    tree.query(bgi::intersects(q), std::back_inserter(hits));
    for (const auto& [p, j] : hits)
      if (j != i && geom::dist(p, c[i]) <= radius) out[i].push_back(j);
    std::sort(out[i].begin(), out[i].end());
  });
  return out;
}

double alignment_deviation(double b, double s) {
  const double x = std::fmod(std::abs(b - s), 90.0);
  return std::min(x, 90.0 - x);
}

double street_orientation(const geom::LineString& line) {
  const Point& a = line.front();
  const Point& b = line.back();
  double deg = std::atan2(b.y() - a.y(), b.x() - a.x()) * 180.0 / M_PI;
  deg = std::fmod(deg, 90.0);
  if (deg < 0.0) deg += 90.0;
  if (deg >= 90.0) deg -= 90.0;
  return deg;
}

// ---------- street profile ----------

struct ProfileCaster::Impl {
  using Entry = std::pair<Box, std::size_t>;
  std::vector<geom::Segment> segs;
  bgi::rtree<Entry, bgi::quadratic<16>> tree;
};

ProfileCaster::ProfileCaster(const std::vector<Building>& buildings) : impl_(new Impl) {
  std::vector<Impl::Entry> entries;
  for (const auto& b : buildings)
    for (const auto& s : geom::polygon_segments(b.footprint)) {
      impl_->segs.push_back(s);
      Box box;
      bg::envelope(geom::LineString{s.a, s.b}, box);
      entries.push_back({box, impl_->segs.size() - 1});
    }
  impl_->tree = decltype(impl_->tree)(entries.begin(), entries.end());
}

ProfileCaster::~ProfileCaster() { delete impl_; }

std::optional<double> ProfileCaster::cast(const Point& o, double dx, double dy, double max_len) const {
  const Point e(o.x() + dx * max_len, o.y() + dy * max_len);
  const Box q(Point(std::min(o.x(), e.x()), std::min(o.y(), e.y())), Point(std::max(o.x(), e.x()), std::max(o.y(), e.y())));
  std::vector<Impl::Entry> hits;
  impl_->tree.query(bgi::intersects(q), std::back_inserter(hits));
  std::optional<double> best;
  for (const auto& [box, k] : hits) {
    const auto& s = impl_->segs[k];
    const double sx = s.b.x() - s.a.x(), sy = s.b.y() - s.a.y();
    const double den = dx * sy - dy * sx;
    if (den == 0.0) continue;  // parallel
    const double wx = s.a.x() - o.x(), wy = s.a.y() - o.y();
    const double t = (wx * sy - wy * sx) / den;   // along the ray
    const double u = (wx * dy - wy * dx) / den;   // along the segment
    if (t < 0.0 || t > max_len || u < 0.0 || u > 1.0) continue;
    if (!best || t < *best) best = t;
  }
  return best;
}

StreetProfile ProfileCaster::profile(const geom::LineString& line, const ProfileConfig& cfg) const {
  StreetProfile out;
  const double total = geom::line_length(line);
  if (!(total > 0.0)) return out;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(total / cfg.tick_spacing)));
  const double half = cfg.tick_len / 2.0;
  std::vector<double> widths;
  std::size_t open = 0;
  std::size_t seg = 0;
  double seg_start = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = (static_cast<double>(k) + 0.5) * total / static_cast<double>(n);
    double seg_len = geom::dist(line[seg], line[seg + 1]);
    while (seg + 2 < line.size() && seg_start + seg_len < s) {
      seg_start += seg_len;
      ++seg;
      seg_len = geom::dist(line[seg], line[seg + 1]);
    }
    if (seg_len == 0.0) continue;
    const double tx = (line[seg + 1].x() - line[seg].x()) / seg_len;
    const double ty = (line[seg + 1].y() - line[seg].y()) / seg_len;
    const double f = s - seg_start;
    const Point p(line[seg].x() + tx * f, line[seg].y() + ty * f);
    double w = 0.0;
    for (double side : {1.0, -1.0}) {
      const auto hit = cast(p, -ty * side, tx * side, half);
      if (hit) {
        w += *hit;
      } else {
        w += half;
        ++open;
      }
    }
    widths.push_back(w);
  }
  if (widths.empty()) return out;
  const double mean = std::accumulate(widths.begin(), widths.end(), 0.0) / static_cast<double>(widths.size());
  double var = 0.0;
  for (double w : widths) var += (w - mean) * (w - mean);
  out.width = mean;
  out.width_deviation = std::sqrt(var / static_cast<double>(widths.size()));
  out.openness = static_cast<double>(open) / static_cast<double>(2 * widths.size());
  return out;
}

// ---------- network ----------

std::vector<std::size_t> ego_nodes(const StreetGraph& g, std::size_t source, double radius) {
  std::vector<double> d(g.nodes.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[source] = 0.0;
  pq.push({0.0, source});
  std::vector<std::size_t> out;
  while (!pq.empty()) {
    auto [dv, v] = pq.top();
    pq.pop();
    if (dv > d[v]) continue;
    out.push_back(v);
    for (std::size_t e : g.incident[v]) {
      const std::size_t w = g.other(e, v);
      const double nd = dv + g.edges[e].length;
      if (nd <= radius && nd < d[w]) {
        d[w] = nd;
        pq.push({nd, w});
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> square_clustering(const StreetGraph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<std::set<std::size_t>> nb(n);
  for (const auto& e : g.edges) {
    if (e.u == e.v) continue;
    nb[e.u].insert(e.v);
    nb[e.v].insert(e.u);
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    double clustering = 0.0, potential = 0.0;
    const std::vector<std::size_t> adj(nb[v].begin(), nb[v].end());
    for (std::size_t a = 0; a < adj.size(); ++a)
      for (std::size_t b = a + 1; b < adj.size(); ++b) {
        const std::size_t u = adj[a], w = adj[b];
        double squares = 0.0;
        for (std::size_t x : nb[u])
          if (x != v && nb[w].count(x)) squares += 1.0;
        clustering += squares;
        double degm = squares + 1.0;
        if (nb[u].count(w)) degm += 1.0;
        potential += (static_cast<double>(nb[u].size()) - degm) + (static_cast<double>(nb[w].size()) - degm) + squares;
      }
    out[v] = potential > 0.0 ? clustering / potential : 0.0;
  }
  return out;
}

NodeMetrics node_metrics(const StreetGraph& g, double radius) {
  const std::size_t n = g.nodes.size();
  NodeMetrics m;
  m.degree.resize(n);
  m.mean_distance.resize(n);
  for (auto* v : {&m.mean_degree, &m.density, &m.edge_node_ratio, &m.cds_length, &m.cyclomatic, &m.gamma, &m.meshedness})
    v->assign(n, kMissing);
  for (std::size_t v = 0; v < n; ++v) {
    m.degree[v] = static_cast<double>(g.degree(v));
    double len = 0.0;
    for (std::size_t e : g.incident[v]) len += g.edges[e].length;
    m.mean_distance[v] = g.degree(v) ? len / static_cast<double>(g.degree(v)) : kMissing;
  }
  m.clustering = square_clustering(g);
  parallel_for(n, [&](std::size_t src) {
    const auto nodes = ego_nodes(g, src, radius);
    const std::size_t v = nodes.size();
    if (v <= 1) return;
    std::unordered_map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < v; ++i) local[nodes[i]] = i;
    std::set<std::size_t> edges;
    for (std::size_t a : nodes)
      for (std::size_t e : g.incident[a])
        if (local.count(g.edges[e].u) && local.count(g.edges[e].v)) edges.insert(e);
    std::vector<std::size_t> parent(v);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    double total = 0.0, cds = 0.0;
    for (std::size_t e : edges) {
      const auto& ed = g.edges[e];
      total += ed.length;
      if (g.degree(ed.u) == 1 || g.degree(ed.v) == 1) cds += ed.length;
      parent[find(local[ed.u])] = find(local[ed.v]);
    }
    std::size_t comps = 0;
    for (std::size_t i = 0; i < v; ++i)
      if (find(i) == i) ++comps;
    const double ve = static_cast<double>(v), ee = static_cast<double>(edges.size());
    m.mean_degree[src] = 2.0 * ee / ve;
    m.density[src] = total > 0.0 ? ve / total * 1000.0 : kMissing;
    m.edge_node_ratio[src] = ee / ve;
    m.cds_length[src] = cds;
    m.cyclomatic[src] = ee - ve + static_cast<double>(comps);
    if (v >= 3) {
      m.gamma[src] = ee / (3.0 * (ve - 2.0));
      m.meshedness[src] = (ee - ve + 1.0) / (2.0 * ve - 5.0);
    }
  });
  return m;
}

// ---------- assembly ----------

namespace {

struct UnionFind {
  std::vector<std::size_t> p;
  explicit UnionFind(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  std::size_t find(std::size_t x) {
    while (p[x] != x) x = p[x] = p[p[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a != b) p[std::max(a, b)] = std::min(a, b);
  }
};

MultiPolygon union_all(const std::vector<const Polygon*>& parts) {
  std::vector<MultiPolygon> layer;
  for (const auto* p : parts) layer.push_back(geom::to_multi(*p));
  if (layer.empty()) return {};
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

double mean_dist(const Point& c, const std::vector<Point>& pts, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return kMissing;
  double s = 0.0;
  for (std::size_t j : idx) s += geom::dist(c, pts[j]);
  return s / static_cast<double>(idx.size());
}

std::vector<std::size_t> filter_radius(const std::vector<std::size_t>& band, const std::vector<Point>& c,
                                       std::size_t i, double r) {
  std::vector<std::size_t> out;
  for (std::size_t j : band)
    if (geom::dist(c[i], c[j]) <= r) out.push_back(j);
  return out;
}

std::vector<std::vector<std::size_t>> with_self(std::vector<std::vector<std::size_t>> hoods) {
  for (std::size_t i = 0; i < hoods.size(); ++i) {
    hoods[i].push_back(i);
    std::sort(hoods[i].begin(), hoods[i].end());
  }
  return hoods;
}

}  // namespace

MetricColumns compute_metrics(const std::vector<Building>& buildings, const std::vector<EtcCell>& cells,
                              const ContiguityGraph& contiguity, const StreetNetwork& network, const StreetGraph& graph,
                              const MorphoConfig& cfg) {
  const auto& cat = metric_catalog();
  const std::size_t nb = buildings.size(), nc = cells.size(), ns = network.segments.size();
  std::unordered_map<std::string, std::vector<double>> col;
  auto put = [&](const std::string& name, std::vector<double> v) { col[name] = std::move(v); };

  // --- buildings ---
  std::vector<ShapeMetrics> bshape(nb);
  std::vector<Point> bc(nb);
  parallel_for(nb, [&](std::size_t i) {
    bshape[i] = shape_metrics(buildings[i].footprint);
    bc[i] = geom::centroid(buildings[i].footprint);
  });
  std::vector<double> barea(nb);
  for (std::size_t i = 0; i < nb; ++i) barea[i] = bshape[i].area;

  // Touch graph.
  std::vector<std::vector<std::size_t>> touch(nb);
  {
    using Entry = std::pair<Box, std::size_t>;
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < nb; ++i) entries.push_back({geom::expand(geom::envelope(buildings[i].footprint), cfg.touch_tol), i});
    bgi::rtree<Entry, bgi::quadratic<16>> tree(entries.begin(), entries.end());
    parallel_for(nb, [&](std::size_t i) {
      std::vector<Entry> hits;
      tree.query(bgi::intersects(entries[i].first), std::back_inserter(hits));
      for (const auto& [box, j] : hits)
        if (j != i && geom::polygon_distance(buildings[i].footprint, buildings[j].footprint) <= cfg.touch_tol)
          touch[i].push_back(j);
      std::sort(touch[i].begin(), touch[i].end());
    });
  }

  std::vector<double> courtyard(nb), cindex(nb), shared(nb, 0.0), wall(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    courtyard[i] = geom::holes_area(buildings[i].footprint);
    cindex[i] = courtyard[i] / (barea[i] + courtyard[i]);
    for (std::size_t j : touch[i]) shared[i] += geom::shared_boundary_length(buildings[i].footprint, buildings[j].footprint);
  }
  {
    UnionFind uf(nb);
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j : touch[i]) uf.unite(i, j);
    std::map<std::size_t, std::vector<std::size_t>> comps;
    for (std::size_t i = 0; i < nb; ++i) comps[uf.find(i)].push_back(i);
    std::vector<std::vector<std::size_t>> groups;
    for (auto& [r, members] : comps) groups.push_back(std::move(members));
    parallel_for(groups.size(), [&](std::size_t g) {
      const auto& members = groups[g];
      double per;
      if (members.size() == 1) {
        per = bg::perimeter(buildings[members[0]].footprint);
      } else {
        std::vector<const Polygon*> parts;
        for (std::size_t i : members) parts.push_back(&buildings[i].footprint);
        per = bg::perimeter(union_all(parts));
      }
      for (std::size_t i : members) wall[i] = per;
    });
  }

  const auto band200 = distance_band(bc, 200.0);
  std::vector<std::vector<std::size_t>> band20(nb), band100(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    band20[i] = filter_radius(band200[i], bc, i, 20.0);
    band100[i] = filter_radius(band200[i], bc, i, 100.0);
  }
  const auto w100 = with_self(band100);
  const auto w200 = with_self(band200);

  put("bld_area", barea);
  put("bld_courtyard_area", courtyard);
  put("bld_courtyard_index", cindex);
  put("bld_perimeter_wall", wall);
  put("bld_perimeter_wall_w100", area_weighted(wall, barea, w100));
  put("bld_perimeter_wall_w200", area_weighted(wall, barea, w200));

  auto shape_field = [](const std::vector<ShapeMetrics>& s, std::size_t k) {
    std::vector<double> v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double* f = &s[i].longest_axis;
      v[i] = f[k];
    }
    return v;
  };
  static_assert(offsetof(ShapeMetrics, shape_index) - offsetof(ShapeMetrics, longest_axis) == 10 * sizeof(double));

  // Mean interbuilding distance: footprint distances for every pair that can
  // share a 200 m band (centroids at most 400 m apart).
  std::vector<double> ibd(nb, kMissing), adjacency(nb, kMissing);
  {
    const auto band400 = distance_band(bc, 400.0);
    std::vector<std::vector<double>> pd(nb);
    parallel_for(nb, [&](std::size_t i) {
      pd[i].resize(band400[i].size());
      for (std::size_t k = 0; k < band400[i].size(); ++k) {
        const std::size_t j = band400[i][k];
        pd[i][k] = geom::polygon_distance(buildings[i].footprint, buildings[j].footprint);
      }
    });
    parallel_for(nb, [&](std::size_t i) {
      std::vector<std::size_t> set = w200[i];
      std::unordered_map<std::size_t, std::size_t> pos;
      for (std::size_t k = 0; k < set.size(); ++k) pos[set[k]] = k;
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t a : set)
        for (std::size_t k = 0; k < band400[a].size(); ++k) {
          const std::size_t b = band400[a][k];
          if (b > a && pos.count(b)) {
            sum += pd[a][k];
            ++count;
          }
        }
      ibd[i] = count ? sum / static_cast<double>(count) : kMissing;
      UnionFind uf(set.size());
      for (std::size_t a : set)
        for (std::size_t b : touch[a]) {
          auto it = pos.find(b);
          if (it != pos.end()) uf.unite(pos[a], it->second);
        }
      std::size_t comps = 0;
      for (std::size_t k = 0; k < set.size(); ++k)
        if (uf.find(k) == k) ++comps;
      adjacency[i] = static_cast<double>(comps) / static_cast<double>(set.size());
    });
  }

  // Street links via cells.
  std::unordered_map<std::int64_t, std::size_t> bidx;
  for (std::size_t i = 0; i < nb; ++i) bidx[buildings[i].id] = i;
  std::vector<std::optional<std::int64_t>> bstreet(nb);
  for (const auto& c : cells) {
    auto it = bidx.find(c.building_id);
    if (it != bidx.end()) bstreet[it->second] = c.nearest_street_id;
  }
  std::unordered_map<std::int64_t, std::size_t> sidx;
  for (std::size_t s = 0; s < ns; ++s) sidx[network.segments[s].id] = s;
  std::vector<double> align(nb, kMissing);
  for (std::size_t i = 0; i < nb; ++i) {
    if (!bstreet[i] || missing(bshape[i].orientation)) continue;
    auto it = sidx.find(*bstreet[i]);
    if (it == sidx.end()) continue;
    align[i] = alignment_deviation(bshape[i].orientation, street_orientation(network.segments[it->second].line));
  }

  std::vector<double> nbr[3], md[3], knn[3];
  for (int k = 0; k < 3; ++k) {
    nbr[k].resize(nb);
    md[k].resize(nb);
    knn[k].assign(nb, kMissing);
  }
  {
    using Entry = std::pair<Point, std::size_t>;
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < nb; ++i) entries.push_back({bc[i], i});
    bgi::rtree<Entry, bgi::quadratic<16>> tree(entries.begin(), entries.end());
    parallel_for(nb, [&](std::size_t i) {
      const std::vector<std::size_t>* hoods[3] = {&band20[i], &band100[i], &band200[i]};
      for (int k = 0; k < 3; ++k) {
        nbr[k][i] = static_cast<double>(hoods[k]->size());
        md[k][i] = mean_dist(bc[i], bc, *hoods[k]);
      }
      std::vector<Entry> hits;
      tree.query(bgi::nearest(bc[i], 31), std::back_inserter(hits));
      std::vector<std::pair<double, std::size_t>> ds;
      for (const auto& [p, j] : hits)
        if (j != i) ds.emplace_back(geom::dist(p, bc[i]), j);
      std::sort(ds.begin(), ds.end());
      const int ks[3] = {10, 20, 30};
      for (int k = 0; k < 3; ++k) {
        const std::size_t take = std::min<std::size_t>(ds.size(), static_cast<std::size_t>(ks[k]));
        if (take == 0) continue;
        double s = 0.0;
        for (std::size_t t = 0; t < take; ++t) s += ds[t].first;
        knn[k][i] = s / static_cast<double>(take);
      }
    });
  }

  // --- cells ---
  std::vector<ShapeMetrics> cshape(nc);
  std::vector<Point> cc(nc);
  parallel_for(nc, [&](std::size_t i) {
    cshape[i] = shape_metrics(cells[i].polygon);
    cc[i] = geom::centroid(cells[i].polygon);
  });
  std::vector<double> carea(nc), car(nc, kMissing), gran(nc), cn[3], cmd2(nc), cmd3(nc);
  std::vector<std::vector<std::size_t>> t3(nc);
  for (auto& v : cn) v.resize(nc);
  for (std::size_t i = 0; i < nc; ++i) carea[i] = cshape[i].area;
  parallel_for(nc, [&](std::size_t i) {
    auto it = bidx.find(cells[i].building_id);
    if (it != bidx.end() && carea[i] > 0.0) car[i] = barea[it->second] / carea[i];
    const auto s1 = within_steps(contiguity, i, 1, false);
    const auto s2 = within_steps(contiguity, i, 2, false);
    const auto s3 = within_steps(contiguity, i, 3, false);
    double g = carea[i];
    for (std::size_t j : s1) g += carea[j];
    gran[i] = g;
    cn[0][i] = static_cast<double>(s1.size());
    cn[1][i] = static_cast<double>(s2.size());
    cn[2][i] = static_cast<double>(s3.size());
    cmd2[i] = mean_dist(cc[i], cc, s2);
    cmd3[i] = mean_dist(cc[i], cc, s3);
    t3[i] = within_steps(contiguity, i, 3, true);
  });

  put("etc_area", carea);
  for (std::size_t k = 0; k < 11; ++k) {
    const std::string n = kShapeNames[k];
    auto bv = shape_field(bshape, k);
    auto cv = shape_field(cshape, k);
    put("bld_" + n + "_w100", area_weighted(bv, barea, w100));
    put("bld_" + n + "_w200", area_weighted(bv, barea, w200));
    put("bld_" + n, std::move(bv));
    put("etc_" + n + "_wt3", area_weighted(cv, carea, t3));
    put("etc_" + n, std::move(cv));
  }
  put("bld_adjacency_d200", adjacency);
  put("bld_interbuilding_distance_d200", ibd);
  put("bld_shared_walls", shared);
  put("bld_street_alignment_w100", area_weighted(align, barea, w100));
  put("bld_street_alignment_w200", area_weighted(align, barea, w200));
  put("bld_street_alignment", align);
  put("etc_car_wt3", area_weighted(car, carea, t3));
  put("etc_car", car);
  put("etc_granularity_t1", gran);
  put("bld_neighbors_d20", nbr[0]);
  put("bld_neighbors_d100", nbr[1]);
  put("bld_neighbors_d200", nbr[2]);
  put("etc_neighbors_t1", cn[0]);
  put("etc_neighbors_t2", cn[1]);
  put("etc_neighbors_t3", cn[2]);
  put("bld_mean_dist_d20", md[0]);
  put("bld_mean_dist_d100", md[1]);
  put("bld_mean_dist_d200", md[2]);
  put("bld_mean_dist_k10", knn[0]);
  put("bld_mean_dist_k20", knn[1]);
  put("bld_mean_dist_k30", knn[2]);
  put("etc_mean_dist_t2", cmd2);
  put("etc_mean_dist_t3", cmd3);

  // --- streets ---
  std::vector<double> slen(ns), slin(ns), sw(ns), swd(ns), sop(ns);
  {
    ProfileCaster caster(buildings);
    parallel_for(ns, [&](std::size_t s) {
      const auto& l = network.segments[s].line;
      slen[s] = geom::line_length(l);
      slin[s] = slen[s] > 0.0 ? geom::dist(l.front(), l.back()) / slen[s] : kMissing;
      const auto p = caster.profile(l, cfg.profile);
      sw[s] = p.width;
      swd[s] = p.width_deviation;
      sop[s] = p.openness;
    });
  }
  put("str_length", slen);
  put("str_linearity", slin);
  put("str_width", sw);
  put("str_width_deviation", swd);
  put("str_openness", sop);

  // --- nodes ---
  const auto r5 = node_metrics(graph, 5.0);
  const auto r400 = node_metrics(graph, 400.0);
  put("node_degree", r5.degree);
  put("node_mean_distance", r5.mean_distance);
  put("node_clustering", r5.clustering);
  put("node_mean_degree_r5", r5.mean_degree);
  put("node_mean_degree_r400", r400.mean_degree);
  put("node_density_r5", r5.density);
  put("node_density_r400", r400.density);
  put("node_edge_node_ratio_r5", r5.edge_node_ratio);
  put("node_edge_node_ratio_r400", r400.edge_node_ratio);
  put("node_cds_length_r5", r5.cds_length);
  put("node_cds_length_r400", r400.cds_length);
  put("node_cyclomatic_r5", r5.cyclomatic);
  put("node_cyclomatic_r400", r400.cyclomatic);
  put("node_gamma_r5", r5.gamma);
  put("node_gamma_r400", r400.gamma);
  put("node_meshedness_r5", r5.meshedness);
  put("node_meshedness_r400", r400.meshedness);

  MetricColumns out;
  for (const auto& b : buildings) out.building_ids.push_back(b.id);
  for (const auto& s : network.segments) out.street_ids.push_back(s.id);
  for (const auto& m : cat) {
    auto it = col.find(m.name);
    if (it == col.end()) throw DataError("metric not computed: " + m.name);
    out.by_metric.push_back(std::move(it->second));
  }
  return out;
}

Table assemble_primary(const std::vector<EtcCell>& cells, const MetricColumns& cols) {
  const auto& cat = metric_catalog();
  if (cols.by_metric.size() != kPrimaryMetrics || cat.size() != kPrimaryMetrics)
    throw DataError("primary matrix must have " + std::to_string(kPrimaryMetrics) + " columns, got " +
                    std::to_string(cols.by_metric.size()));
  std::vector<std::int64_t> ids;
  std::vector<std::string> names;
  for (const auto& c : cells) ids.push_back(c.id);
  for (const auto& m : cat) names.push_back(m.name);
  Table t(ids, names);
  t.id_name = "cell_id";
  std::unordered_map<std::int64_t, std::size_t> bidx;
  for (std::size_t i = 0; i < cols.building_ids.size(); ++i) bidx[cols.building_ids[i]] = i;
  std::unordered_map<std::int64_t, std::int64_t> sidx;
  for (std::size_t i = 0; i < cols.street_ids.size(); ++i) sidx[cols.street_ids[i]] = static_cast<std::int64_t>(i);
  auto pick = [](const std::vector<double>& v, std::optional<std::int64_t> idx) {
    if (!idx || *idx < 0 || static_cast<std::size_t>(*idx) >= v.size()) return kMissing;
    return v[static_cast<std::size_t>(*idx)];
  };
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto& c = cells[r];
    std::optional<std::int64_t> b;
    if (auto it = bidx.find(c.building_id); it != bidx.end()) b = static_cast<std::int64_t>(it->second);
    std::optional<std::int64_t> s;
    if (c.nearest_street_id)
      if (auto it = sidx.find(*c.nearest_street_id); it != sidx.end()) s = it->second;
    for (std::size_t m = 0; m < cat.size(); ++m) {
      const auto& v = cols.by_metric[m];
      switch (cat[m].element) {
        case Element::building: t.at(r, m) = pick(v, b); break;
        case Element::etc: t.at(r, m) = v.at(r); break;
        case Element::street: t.at(r, m) = pick(v, s); break;
        case Element::node: t.at(r, m) = pick(v, c.nearest_node_id); break;
      }
    }
  }
  return t;
}

Table primary_matrix(const std::vector<Building>& buildings, const std::vector<EtcCell>& cells,
                     const ContiguityGraph& contiguity, const StreetNetwork& network, const StreetGraph& graph,
                     const MorphoConfig& cfg) {
  return assemble_primary(cells, compute_metrics(buildings, cells, contiguity, network, graph, cfg));
}

}  // namespace morpholcz
