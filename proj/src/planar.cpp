// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/planar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <utility>

#include <boost/geometry/index/rtree.hpp>

namespace morpholcz::geom {

namespace bgi = boost::geometry::index;

namespace {

struct Split {
  double param;
  Point p;
};

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Projection parameter (in metres along the segment) and perpendicular distance.
std::pair<double, double> project(const Segment& s, const Point& q) {
  const double len = dist(s.a, s.b);
  const double ux = (s.b.x() - s.a.x()) / len, uy = (s.b.y() - s.a.y()) / len;
  const double rx = q.x() - s.a.x(), ry = q.y() - s.a.y();
  return {rx * ux + ry * uy, std::abs(rx * uy - ry * ux)};
}

void endpoint_on(const Segment& host, const Point& q, double tol, std::vector<Split>& out) {
  const double len = dist(host.a, host.b);
  auto [t, d] = project(host, q);
  if (d <= tol && t > tol && t < len - tol) out.push_back({t, q});
}

struct KeyHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
    return std::hash<std::int64_t>()(k.first * 73856093LL ^ k.second * 19349663LL);
  }
};

class NodeSnapper {
 public:
  explicit NodeSnapper(double tol) : tol_(std::max(tol, 1e-12)) {}

  std::size_t id(const Point& p) {
    const auto kx = static_cast<std::int64_t>(std::floor(p.x() / tol_));
    const auto ky = static_cast<std::int64_t>(std::floor(p.y() / tol_));
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find({kx + dx, ky + dy});
        if (it == cells_.end()) continue;
        for (std::size_t n : it->second) {
          if (dist(nodes_[n], p) <= tol_) return n;
        }
      }
    }
    const std::size_t n = nodes_.size();
    nodes_.push_back(p);
    cells_[{kx, ky}].push_back(n);
    return n;
  }

  const std::vector<Point>& nodes() const { return nodes_; }

 private:
  double tol_;
  std::vector<Point> nodes_;
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>, KeyHash> cells_;
};

struct Graph {
  std::vector<Point> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // u < v
  std::vector<bool> alive;
};

Graph build_graph(std::span<const Segment> segments, double tol) {
  auto noded = node_segments(segments, tol);
  NodeSnapper snap(tol);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& s : noded) {
    std::size_t u = snap.id(s.a);
    std::size_t v = snap.id(s.b);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    edges.emplace_back(u, v);
  }
  // Dedup while keeping first-seen order.
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
  std::vector<bool> keep(edges.size(), true);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (edges[order[i]] == edges[order[i - 1]]) keep[order[i]] = false;
  }
  Graph g;
  g.nodes = snap.nodes();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (keep[i]) g.edges.push_back(edges[i]);
  }
  g.alive.assign(g.edges.size(), true);
  return g;
}

void prune_dangles(Graph& g) {
  std::vector<std::vector<std::size_t>> inc(g.nodes.size());
  std::vector<std::size_t> deg(g.nodes.size(), 0);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!g.alive[e]) continue;
    inc[g.edges[e].first].push_back(e);
    inc[g.edges[e].second].push_back(e);
    ++deg[g.edges[e].first];
    ++deg[g.edges[e].second];
  }
  std::vector<std::size_t> stack;
  for (std::size_t n = 0; n < deg.size(); ++n)
    if (deg[n] == 1) stack.push_back(n);
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    if (deg[n] != 1) continue;
    for (std::size_t e : inc[n]) {
      if (!g.alive[e]) continue;
      g.alive[e] = false;
      const std::size_t o = g.edges[e].first == n ? g.edges[e].second : g.edges[e].first;
      --deg[n];
      --deg[o];
      if (deg[o] == 1) stack.push_back(o);
      break;
    }
  }
}

struct Cycle {
  std::vector<std::size_t> nodes;
  double area = 0.0;
  std::size_t component = 0;
};

// Trace face cycles; returns cycles and per-half-edge cycle ids.
std::vector<Cycle> trace(const Graph& g, std::vector<std::size_t>& cycle_of) {
  const std::size_t nh = g.edges.size() * 2;
  auto origin = [&](std::size_t h) { return (h & 1) ? g.edges[h >> 1].second : g.edges[h >> 1].first; };
  auto dest = [&](std::size_t h) { return (h & 1) ? g.edges[h >> 1].first : g.edges[h >> 1].second; };

  std::vector<std::vector<std::size_t>> out(g.nodes.size());
  for (std::size_t h = 0; h < nh; ++h) {
    if (g.alive[h >> 1]) out[origin(h)].push_back(h);
  }
  std::vector<double> angle(nh, 0.0);
  std::vector<std::size_t> pos(nh, 0);
  for (std::size_t n = 0; n < out.size(); ++n) {
    for (std::size_t h : out[n]) {
      const Point& a = g.nodes[origin(h)];
      const Point& b = g.nodes[dest(h)];
      angle[h] = std::atan2(b.y() - a.y(), b.x() - a.x());
    }
    std::sort(out[n].begin(), out[n].end(), [&](std::size_t x, std::size_t y) {
      return angle[x] < angle[y] || (angle[x] == angle[y] && x < y);
    });
    for (std::size_t i = 0; i < out[n].size(); ++i) pos[out[n][i]] = i;
  }

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  cycle_of.assign(nh, kNone);
  std::vector<Cycle> cycles;
  for (std::size_t start = 0; start < nh; ++start) {
    if (!g.alive[start >> 1] || cycle_of[start] != kNone) continue;
    Cycle c;
    std::size_t h = start;
    const std::size_t cid = cycles.size();
    while (cycle_of[h] == kNone) {
      cycle_of[h] = cid;
      c.nodes.push_back(origin(h));
      const std::size_t v = dest(h);
      const std::size_t k = out[v].size();
      h = out[v][(pos[h ^ 1] + k - 1) % k];
    }
    double a = 0.0;
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
      const Point& p = g.nodes[c.nodes[i]];
      const Point& q = g.nodes[c.nodes[(i + 1) % c.nodes.size()]];
      a += p.x() * q.y() - q.x() * p.y();
    }
    c.area = a / 2.0;
    cycles.push_back(std::move(c));
  }
  return cycles;
}

std::size_t find(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

Ring make_ring(const Graph& g, const std::vector<std::size_t>& nodes, bool reverse) {
  Ring r;
  if (reverse) {
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) r.push_back(g.nodes[*it]);
  } else {
    for (std::size_t n : nodes) r.push_back(g.nodes[n]);
  }
  r.push_back(r.front());
  return r;
}

}  // namespace

std::vector<Segment> node_segments(std::span<const Segment> segments, double tol) {
  using Value = std::pair<Box, std::size_t>;
  std::vector<Segment> segs;
  segs.reserve(segments.size());
  for (const auto& s : segments) {
    if (dist(s.a, s.b) > tol) segs.push_back(s);
  }
  std::vector<Value> boxes;
  boxes.reserve(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    Box b(Point(std::min(s.a.x(), s.b.x()) - tol, std::min(s.a.y(), s.b.y()) - tol),
          Point(std::max(s.a.x(), s.b.x()) + tol, std::max(s.a.y(), s.b.y()) + tol));
    boxes.emplace_back(b, i);
  }
  bgi::rtree<Value, bgi::rstar<16>> tree(boxes.begin(), boxes.end());

  std::vector<std::vector<Split>> splits(segs.size());
  std::vector<Value> hits;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    hits.clear();
    tree.query(bgi::intersects(boxes[i].first), std::back_inserter(hits));
    const Segment& si = segs[i];
    const double li = dist(si.a, si.b);
    for (const auto& hv : hits) {
      const std::size_t j = hv.second;
      if (j <= i) continue;
      const Segment& sj = segs[j];
      const double lj = dist(sj.a, sj.b);
      endpoint_on(si, sj.a, tol, splits[i]);
      endpoint_on(si, sj.b, tol, splits[i]);
      endpoint_on(sj, si.a, tol, splits[j]);
      endpoint_on(sj, si.b, tol, splits[j]);
      const double rx = si.b.x() - si.a.x(), ry = si.b.y() - si.a.y();
      const double sx = sj.b.x() - sj.a.x(), sy = sj.b.y() - sj.a.y();
      const double denom = cross2(rx, ry, sx, sy);
      if (std::abs(denom) <= 1e-15 * li * lj) continue;
      const double qx = sj.a.x() - si.a.x(), qy = sj.a.y() - si.a.y();
      const double t = cross2(qx, qy, sx, sy) / denom;
      const double u = cross2(qx, qy, rx, ry) / denom;
      if (t * li > tol && (1.0 - t) * li > tol && u * lj > tol && (1.0 - u) * lj > tol) {
        const Point p(si.a.x() + t * rx, si.a.y() + t * ry);
        splits[i].push_back({t * li, p});
        splits[j].push_back({u * lj, p});
      }
    }
  }

  std::vector<Segment> out;
  out.reserve(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    auto& sp = splits[i];
    std::sort(sp.begin(), sp.end(), [](const Split& a, const Split& b) { return a.param < b.param; });
    Point prev = segs[i].a;
    for (const auto& s : sp) {
      if (dist(prev, s.p) > tol) {
        out.push_back({prev, s.p});
        prev = s.p;
      }
    }
    if (dist(prev, segs[i].b) > tol) out.push_back({prev, segs[i].b});
  }
  return out;
}

std::vector<Polygon> polygonize(std::span<const Segment> segments, double snap_tol) {
  Graph g = build_graph(segments, snap_tol);
  std::vector<std::size_t> cycle_of;
  std::vector<Cycle> cycles;
  for (;;) {
    prune_dangles(g);
    cycles = trace(g, cycle_of);
    bool removed = false;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      if (g.alive[e] && cycle_of[2 * e] == cycle_of[2 * e + 1]) {
        g.alive[e] = false;
        removed = true;
      }
    }
    if (!removed) break;
  }

  std::vector<std::size_t> parent(g.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!g.alive[e]) continue;
    const std::size_t a = find(parent, g.edges[e].first), b = find(parent, g.edges[e].second);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  for (auto& c : cycles) c.component = find(parent, c.nodes.front());

  std::vector<std::size_t> face_ids;
  std::unordered_map<std::size_t, std::size_t> outer_of;  // component -> cycle
  for (std::size_t c = 0; c < cycles.size(); ++c) {
    if (cycles[c].area > 0.0) {
      face_ids.push_back(c);
    } else {
      auto it = outer_of.find(cycles[c].component);
      if (it == outer_of.end() || cycles[c].area < cycles[it->second].area) {
        outer_of[cycles[c].component] = c;
      }
    }
  }

  std::vector<Polygon> faces(face_ids.size());
  std::vector<std::pair<Box, std::size_t>> face_boxes;
  for (std::size_t f = 0; f < face_ids.size(); ++f) {
    faces[f].outer() = make_ring(g, cycles[face_ids[f]].nodes, true);
    face_boxes.emplace_back(bg::return_envelope<Box>(faces[f].outer()), f);
  }
  bgi::rtree<std::pair<Box, std::size_t>, bgi::rstar<16>> face_tree(face_boxes.begin(), face_boxes.end());

  // Deterministic order over components.
  std::vector<std::pair<std::size_t, std::size_t>> outers(outer_of.begin(), outer_of.end());
  std::sort(outers.begin(), outers.end());
  for (const auto& [comp, cyc] : outers) {
    const Point p = g.nodes[cycles[cyc].nodes.front()];
    std::vector<std::pair<Box, std::size_t>> cand;
    face_tree.query(bgi::contains(p), std::back_inserter(cand));
    std::size_t best = static_cast<std::size_t>(-1);
    double best_area = 0.0;
    for (const auto& [box, f] : cand) {
      if (cycles[face_ids[f]].component == comp) continue;
      if (!inside_ring(p, faces[f].outer())) continue;
      const double a = cycles[face_ids[f]].area;
      if (best == static_cast<std::size_t>(-1) || a < best_area) {
        best = f;
        best_area = a;
      }
    }
    if (best != static_cast<std::size_t>(-1)) {
      faces[best].inners().push_back(make_ring(g, cycles[cyc].nodes, true));
    }
  }
  return faces;
}

}  // namespace morpholcz::geom
