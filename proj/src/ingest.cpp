// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/ingest.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include "morpholcz/error.hpp"

namespace morpholcz {

namespace bg = geom::bg;
namespace bgi = boost::geometry::index;
using geom::Box;
using geom::LineString;
using geom::MultiPolygon;
using geom::Point;
using geom::Polygon;

using BoxEntry = std::pair<Box, std::size_t>;
using BoxTree = bgi::rtree<BoxEntry, bgi::quadratic<16>>;

nlohmann::json IngestReport::to_json() const {
  nlohmann::json j;
  j["counters"] = counters;
  j["events"] = nlohmann::json::array();
  for (const auto& e : events) j["events"].push_back({{"rule", e.rule}, {"id", e.id}, {"area_delta", e.area_delta}});
  return j;
}

bool is_tunnel_feature(const nlohmann::json& props) {
  auto truthy = [](const nlohmann::json& v) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number()) return v.get<double>() != 0.0;
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      return s == "yes" || s == "true" || s == "1" || s == "tunnel";
    }
    return false;
  };
  for (const char* key : {"is_tunnel", "tunnel"})
    if (props.contains(key) && truthy(props[key])) return true;
  if (props.contains("structure") && props["structure"] == "tunnel") return true;
  return false;
}

namespace {

void note(IngestReport* r, const std::string& rule, std::int64_t id, double delta) {
  if (r) r->event(rule, id, delta);
}
void tally(IngestReport* r, const std::string& rule, std::int64_t n = 1) {
  if (r && n) r->count(rule, n);
}

constexpr double kAreaTol = 1e-6;

double overlap_area(const Polygon& a, const Polygon& b) {
  MultiPolygon out;
  bg::intersection(a, b, out);
  return bg::area(out);
}

std::optional<Polygon> union_single(const Polygon& a, const Polygon& b) {
  MultiPolygon out;
  bg::union_(a, b, out);
  if (out.size() != 1) return std::nullopt;
  return out.front();
}

Polygon simplified(const Polygon& p, double tol) {
  if (tol <= 0.0) return p;
  Polygon s;
  bg::simplify(p, s, tol);
  bg::correct(s);
  if (s.outer().size() < 4 || !bg::is_valid(s) || bg::area(s) <= 0.0) return p;
  for (const auto& r : s.inners())
    if (r.size() < 4) return p;
  return s;
}

void resolve_overlaps(std::vector<Polygon>& polys, std::vector<bool>& alive, const std::vector<std::int64_t>& ids,
                      double merge_frac, IngestReport* report) {
  // Merged footprints can grow into new overlaps, so repeat until clean.
  for (int pass = 0; pass < 16; ++pass) {
    BoxTree tree;
    for (std::size_t i = 0; i < polys.size(); ++i)
      if (alive[i]) tree.insert({geom::envelope(polys[i]), i});
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    std::vector<BoxEntry> hits;
    for (std::size_t i = 0; i < polys.size(); ++i) {
      if (!alive[i]) continue;
      hits.clear();
      tree.query(bgi::intersects(geom::envelope(polys[i])), std::back_inserter(hits));
      for (const auto& [box, j] : hits) {
        if (j <= i) continue;
        const double a = overlap_area(polys[i], polys[j]);
        if (a > kAreaTol) pairs.emplace_back(a, i, j);
      }
    }
    if (pairs.empty()) return;
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
      if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
      return std::tie(std::get<1>(x), std::get<2>(x)) < std::tie(std::get<1>(y), std::get<2>(y));
    });
    for (const auto& [a0, i, j] : pairs) {
      if (!alive[i] || !alive[j]) continue;
      const double a = overlap_area(polys[i], polys[j]);
      if (a <= kAreaTol) continue;
      const double ai = bg::area(polys[i]);
      const double aj = bg::area(polys[j]);
      // Equal areas: the later footprint counts as the smaller one.
      const std::size_t small = ai < aj ? i : j;
      const std::size_t large = small == i ? j : i;
      const double as = bg::area(polys[small]);
      const double al = bg::area(polys[large]);
      if (a / as > merge_frac) {
        if (auto u = union_single(polys[large], polys[small])) {
          polys[large] = *u;
          alive[small] = false;
          note(report, "overlap_merged", ids[small], bg::area(*u) - al - as);
          continue;
        }
      }
      MultiPolygon diff;
      bg::difference(polys[small], polys[large], diff);
      const Polygon* best = nullptr;
      for (const auto& part : diff)
        if (bg::area(part) > kAreaTol && (!best || bg::area(part) > bg::area(*best))) best = &part;
      if (!best) {
        alive[small] = false;
        note(report, "overlap_trimmed_away", ids[small], -as);
      } else {
        Polygon keep = *best;
        polys[small] = keep;
        note(report, "overlap_trimmed", ids[small], bg::area(keep) - as);
      }
    }
  }
}

void merge_small(std::vector<Polygon>& polys, std::vector<bool>& alive, const std::vector<std::int64_t>& ids,
                 double small_area, IngestReport* report) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < polys.size(); ++i)
    if (alive[i] && bg::area(polys[i]) < small_area) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return bg::area(polys[a]) < bg::area(polys[b]); });
  BoxTree tree;
  for (std::size_t i = 0; i < polys.size(); ++i)
    if (alive[i]) tree.insert({geom::envelope(polys[i]), i});
  std::vector<BoxEntry> hits;
  for (std::size_t i : order) {
    if (!alive[i]) continue;
    const double ai = bg::area(polys[i]);
    if (ai >= small_area) continue;
    hits.clear();
    tree.query(bgi::intersects(geom::expand(geom::envelope(polys[i]), 1e-6)), std::back_inserter(hits));
    struct Cand {
      double shared, area;
      std::size_t j;
    };
    std::vector<Cand> cands;
    for (const auto& [box, j] : hits) {
      if (j == i || !alive[j]) continue;
      const double aj = bg::area(polys[j]);
      if (aj <= ai) continue;
      if (geom::polygon_distance(polys[i], polys[j]) > 1e-6) continue;
      cands.push_back({geom::shared_boundary_length(polys[i], polys[j]), aj, j});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      if (x.shared != y.shared) return x.shared > y.shared;
      if (x.area != y.area) return x.area > y.area;
      return x.j < y.j;
    });
    for (const auto& c : cands) {
      auto u = union_single(polys[c.j], polys[i]);
      if (!u) continue;
      tree.remove({geom::envelope(polys[c.j]), c.j});
      tree.remove({geom::envelope(polys[i]), i});
      polys[c.j] = *u;
      tree.insert({geom::envelope(polys[c.j]), c.j});
      alive[i] = false;
      note(report, "small_merged", ids[i], bg::area(*u) - c.area - ai);
      break;
    }
  }
}

}  // namespace

std::vector<Building> preprocess_buildings(const io::FeatureCollection& raw, const IngestConfig& cfg,
                                           IngestReport* report) {
  std::vector<Polygon> polys;
  std::vector<std::int64_t> ids;
  std::int64_t next_id = 0;
  for (const auto& f : raw.features) {
    auto parts = io::polygon_parts(f.geometry);
    if (parts.empty()) {
      tally(report, "dropped_non_polygon");
      continue;
    }
    std::vector<Polygon> fixed;
    for (const auto& p : parts) {
      if (bg::is_valid(p)) {
        fixed.push_back(p);
        continue;
      }
      tally(report, "fixed_invalid");
      for (auto& q : geom::make_valid(p)) fixed.push_back(std::move(q));
    }
    if (fixed.size() > 1) tally(report, "exploded_parts", static_cast<std::int64_t>(fixed.size()));
    for (auto& p : fixed) {
      if (bg::area(p) <= 0.0) {
        tally(report, "dropped_degenerate");
        continue;
      }
      polys.push_back(std::move(p));
      ids.push_back(next_id++);
    }
  }

  std::vector<bool> alive(polys.size(), true);
  for (std::size_t i = 0; i < polys.size(); ++i) {
    const double a = bg::area(polys[i]);
    if (a > cfg.max_building_area) {
      alive[i] = false;
      note(report, "dropped_too_large", ids[i], -a);
    }
  }
  for (std::size_t i = 0; i < polys.size(); ++i) {
    if (!alive[i]) continue;
    const double before = bg::area(polys[i]);
    Polygon s = simplified(polys[i], cfg.simplify_tol);
    const double after = bg::area(s);
    if (s.outer().size() != polys[i].outer().size() || after != before) {
      polys[i] = std::move(s);
      note(report, "simplified", ids[i], after - before);
    }
  }
  resolve_overlaps(polys, alive, ids, cfg.merge_overlap_frac, report);
  merge_small(polys, alive, ids, cfg.small_building_area, report);
  // Unions can move shared vertices by an ulp or two; clear any residue.
  resolve_overlaps(polys, alive, ids, cfg.merge_overlap_frac, report);

  std::vector<Building> out;
  for (std::size_t i = 0; i < polys.size(); ++i)
    if (alive[i]) out.push_back({ids[i], std::move(polys[i])});
  tally(report, "buildings_out", static_cast<std::int64_t>(out.size()));
  return out;
}

// ---------- streets ----------

namespace {

struct Snapper {
  double tol;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
  std::vector<Point> nodes;

  std::int64_t key(std::int64_t gx, std::int64_t gy) const { return gx * 73856093LL ^ gy * 19349663LL; }
  std::size_t snap(const Point& p) {
    const double cell = std::max(tol, 1e-9);
    const auto gx = static_cast<std::int64_t>(std::floor(p.x() / cell));
    const auto gy = static_cast<std::int64_t>(std::floor(p.y() / cell));
    std::size_t best = nodes.size();
    double bd = tol;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = grid.find(key(gx + dx, gy + dy));
        if (it == grid.end()) continue;
        for (std::size_t n : it->second) {
          const double d = geom::dist(nodes[n], p);
          if (d <= bd && (best == nodes.size() || d < bd || n < best)) {
            best = n;
            bd = d;
          }
        }
      }
    if (best != nodes.size()) return best;
    nodes.push_back(p);
    grid[key(gx, gy)].push_back(nodes.size() - 1);
    return nodes.size() - 1;
  }
};

LineString clean_line(const LineString& l) {
  LineString out;
  for (const auto& p : l)
    if (out.empty() || !bg::equals(out.back(), p)) out.push_back(p);
  return out;
}

std::vector<std::pair<double, double>> canonical(const LineString& l) {
  std::vector<std::pair<double, double>> fwd, rev;
  for (const auto& p : l) fwd.emplace_back(p.x(), p.y());
  rev.assign(fwd.rbegin(), fwd.rend());
  return std::min(fwd, rev);
}

// Split lines at every snapped node lying on their interior: endpoints of
// other lines and vertices shared between lines.
std::vector<LineString> node_lines(std::vector<LineString> lines, double tol) {
  Snapper snap{tol, {}, {}};
  std::vector<std::vector<std::size_t>> vid(lines.size());
  std::vector<int> uses;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (auto& p : lines[i]) {
      const std::size_t n = snap.snap(p);
      p = snap.nodes[n];
      vid[i].push_back(n);
      if (uses.size() <= n) uses.resize(n + 1, 0);
    }
    std::set<std::size_t> distinct(vid[i].begin(), vid[i].end());
    for (auto n : distinct) ++uses[n];
  }
  std::vector<bool> is_node(snap.nodes.size(), false);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    is_node[vid[i].front()] = true;
    is_node[vid[i].back()] = true;
  }
  for (std::size_t n = 0; n < uses.size(); ++n)
    if (uses[n] > 1) is_node[n] = true;

  // Endpoints falling on another line's segment interior become new vertices.
  BoxTree tree;
  for (std::size_t i = 0; i < lines.size(); ++i) tree.insert({geom::expand(geom::envelope(lines[i]), tol), i});
  std::vector<std::size_t> endpoint_nodes;
  for (std::size_t n = 0; n < snap.nodes.size(); ++n)
    if (is_node[n]) endpoint_nodes.push_back(n);
  std::vector<std::vector<std::pair<std::size_t, std::pair<double, std::size_t>>>> inserts(lines.size());
  std::vector<BoxEntry> hits;
  for (std::size_t n : endpoint_nodes) {
    const Point& q = snap.nodes[n];
    hits.clear();
    tree.query(bgi::intersects(q), std::back_inserter(hits));
    for (const auto& [box, i] : hits) {
      if (std::find(vid[i].begin(), vid[i].end(), n) != vid[i].end()) continue;
      const auto& l = lines[i];
      for (std::size_t s = 0; s + 1 < l.size(); ++s) {
        const double dx = l[s + 1].x() - l[s].x(), dy = l[s + 1].y() - l[s].y();
        const double len2 = dx * dx + dy * dy;
        if (len2 == 0.0) continue;
        const double t = ((q.x() - l[s].x()) * dx + (q.y() - l[s].y()) * dy) / len2;
        if (t <= 0.0 || t >= 1.0) continue;
        const Point proj(l[s].x() + t * dx, l[s].y() + t * dy);
        if (geom::dist(proj, q) <= tol) {
          inserts[i].push_back({s, {t, n}});
          break;
        }
      }
    }
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (inserts[i].empty()) continue;
    std::sort(inserts[i].begin(), inserts[i].end());
    LineString l;
    std::vector<std::size_t> ids;
    std::size_t k = 0;
    for (std::size_t s = 0; s < lines[i].size(); ++s) {
      l.push_back(lines[i][s]);
      ids.push_back(vid[i][s]);
      while (k < inserts[i].size() && inserts[i][k].first == s) {
        const std::size_t n = inserts[i][k].second.second;
        l.push_back(snap.nodes[n]);
        ids.push_back(n);
        ++k;
      }
    }
    lines[i] = std::move(l);
    vid[i] = std::move(ids);
  }

  std::vector<LineString> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    LineString cur;
    for (std::size_t s = 0; s < lines[i].size(); ++s) {
      cur.push_back(lines[i][s]);
      const bool last = s + 1 == lines[i].size();
      if (s > 0 && (last || is_node[vid[i][s]])) {
        LineString c = clean_line(cur);
        if (c.size() >= 2) out.push_back(std::move(c));
        cur.clear();
        cur.push_back(lines[i][s]);
      }
    }
  }
  return out;
}

struct PtLess {
  bool operator()(const Point& a, const Point& b) const {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  }
};

std::vector<LineString> merge_chains(std::vector<LineString> lines) {
  std::map<Point, std::vector<std::pair<std::size_t, bool>>, PtLess> ends;  // (line, at_start)
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ends[lines[i].front()].push_back({i, true});
    ends[lines[i].back()].push_back({i, false});
  }
  std::vector<bool> alive(lines.size(), true);
  for (auto& [pt, list] : ends) {
    if (list.size() != 2 || list[0].first == list[1].first) continue;
    auto [a, a_start] = list[0];
    auto [b, b_start] = list[1];
    if (a > b) {
      std::swap(a, b);
      std::swap(a_start, b_start);
    }
    LineString la = lines[a], lb = lines[b];
    if (a_start) std::reverse(la.begin(), la.end());  // la now ends at pt
    if (!b_start) std::reverse(lb.begin(), lb.end());  // lb now starts at pt
    const Point a_other = la.front();
    const Point b_other = lb.back();
    la.insert(la.end(), lb.begin() + 1, lb.end());
    const bool a_flipped = a_start;
    lines[a] = std::move(la);
    alive[b] = false;
    // Re-point the far ends of both lines to the merged line.
    for (auto& e : ends[b_other])
      if (e.first == b) e = {a, false};
    for (auto& e : ends[a_other])
      if (e.first == a && e.second == !a_flipped) e = {a, true};
    list.clear();
  }
  std::vector<LineString> out;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (alive[i]) out.push_back(std::move(lines[i]));
  return out;
}

}  // namespace

StreetNetwork preprocess_streets(const StreetNetwork& in, const IngestConfig& cfg, IngestReport* report) {
  std::vector<LineString> lines;
  for (const auto& s : in.segments) {
    if (s.is_tunnel && geom::line_length(s.line) > cfg.max_tunnel_length) {
      tally(report, "removed_tunnel");
      continue;
    }
    LineString c = clean_line(s.line);
    if (c.size() < 2) {
      tally(report, "dropped_degenerate_street");
      continue;
    }
    lines.push_back(std::move(c));
  }
  if (!cfg.skip_simplify) {
    lines = node_lines(std::move(lines), cfg.snap_tol);
    std::set<std::vector<std::pair<double, double>>> seen;
    std::vector<LineString> unique;
    for (auto& l : lines) {
      if (seen.insert(canonical(l)).second)
        unique.push_back(std::move(l));
      else
        tally(report, "removed_duplicate_street");
    }
    const std::size_t before = unique.size();
    lines = merge_chains(std::move(unique));
    tally(report, "merged_chain_links", static_cast<std::int64_t>(before - lines.size()));
  }
  StreetNetwork net;
  for (auto& l : lines) {
    StreetSegment s;
    s.id = static_cast<std::int64_t>(net.segments.size());
    s.length_m = geom::line_length(l);
    s.line = std::move(l);
    if (s.length_m > 0.0) net.segments.push_back(std::move(s));
  }
  if (net.segments.empty()) throw DataError("street network is empty after preprocessing");
  tally(report, "streets_out", static_cast<std::int64_t>(net.segments.size()));
  return net;
}

StreetNetwork preprocess_streets(const io::FeatureCollection& raw, const IngestConfig& cfg, IngestReport* report) {
  StreetNetwork in;
  for (const auto& f : raw.features) {
    const bool tunnel = is_tunnel_feature(f.properties);
    auto parts = io::line_parts(f.geometry);
    if (parts.empty()) tally(report, "dropped_non_line");
    for (auto& l : parts) {
      StreetSegment s;
      s.id = static_cast<std::int64_t>(in.segments.size());
      s.is_tunnel = tunnel;
      s.length_m = geom::line_length(l);
      s.line = std::move(l);
      in.segments.push_back(std::move(s));
    }
  }
  return preprocess_streets(in, cfg, report);
}

ConsistencyResult consistency_check(const std::vector<Building>& buildings, const StreetNetwork& streets,
                                    const std::vector<LineString>& waterlines,
                                    const std::vector<Polygon>& waterbodies, IngestReport* report) {
  static const bg::de9im::mask interiors("T********");
  BoxTree street_tree, water_tree;
  for (std::size_t i = 0; i < streets.segments.size(); ++i)
    street_tree.insert({geom::envelope(streets.segments[i].line), i});
  for (std::size_t i = 0; i < waterbodies.size(); ++i) water_tree.insert({geom::envelope(waterbodies[i]), i});

  ConsistencyResult res;
  std::vector<BoxEntry> hits;
  for (const auto& b : buildings) {
    const Box env = geom::envelope(b.footprint);
    bool drop = false;
    hits.clear();
    street_tree.query(bgi::intersects(env), std::back_inserter(hits));
    for (const auto& [box, i] : hits)
      if (bg::relate(streets.segments[i].line, b.footprint, interiors)) {
        drop = true;
        break;
      }
    if (!drop) {
      hits.clear();
      water_tree.query(bgi::intersects(env), std::back_inserter(hits));
      for (const auto& [box, i] : hits)
        if (bg::relate(b.footprint, waterbodies[i], interiors)) {
          drop = true;
          break;
        }
    }
    if (drop) {
      res.removed_buildings.push_back(b.id);
      note(report, "removed_building_conflict", b.id, -bg::area(b.footprint));
    } else {
      res.buildings.push_back(b);
    }
  }
  BoxTree bld_tree;
  for (std::size_t i = 0; i < res.buildings.size(); ++i) bld_tree.insert({geom::envelope(res.buildings[i].footprint), i});
  for (std::size_t w = 0; w < waterlines.size(); ++w) {
    hits.clear();
    bld_tree.query(bgi::intersects(geom::envelope(waterlines[w])), std::back_inserter(hits));
    bool drop = false;
    for (const auto& [box, i] : hits)
      if (bg::intersects(waterlines[w], res.buildings[i].footprint)) {
        drop = true;
        break;
      }
    if (drop) {
      res.removed_waterlines.push_back(w);
      tally(report, "removed_waterline");
    } else {
      res.waterlines.push_back(waterlines[w]);
    }
  }
  return res;
}

}  // namespace morpholcz
