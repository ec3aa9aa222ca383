// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/context.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "morpholcz/error.hpp"
#include "morpholcz/parallel.hpp"

namespace morpholcz {

namespace bgi = boost::geometry::index;

std::size_t ContiguityGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adj) n += a.size();
  return n / 2;
}

ContiguityGraph build_contiguity(const std::vector<EtcCell>& cells, double tol) {
  using Entry = std::pair<geom::Box, std::size_t>;
  ContiguityGraph g;
  g.adj.resize(cells.size());
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    g.ids.push_back(cells[i].id);
    entries.push_back({geom::expand(geom::envelope(cells[i].polygon), tol), i});
  }
  bgi::rtree<Entry, bgi::quadratic<16>> tree(entries.begin(), entries.end());
  parallel_for(cells.size(), [&](std::size_t i) {
    std::vector<Entry> hits;
    tree.query(bgi::intersects(entries[i].first), std::back_inserter(hits));
    for (const auto& [box, j] : hits) {
      if (j == i) continue;
      if (geom::polygon_distance(cells[i].polygon, cells[j].polygon) <= tol) g.adj[i].push_back(j);
    }
    std::sort(g.adj[i].begin(), g.adj[i].end());
  });
  return g;
}

std::vector<std::size_t> within_steps(const ContiguityGraph& g, std::size_t focal, int steps, bool include_focal) {
  std::vector<std::size_t> out;
  std::unordered_map<std::size_t, int> depth;
  std::deque<std::size_t> queue{focal};
  depth[focal] = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    const int d = depth[v];
    if (d == steps) continue;
    for (std::size_t w : g.adj[v]) {
      if (depth.count(w)) continue;
      depth[w] = d + 1;
      queue.push_back(w);
    }
  }
  for (const auto& [v, d] : depth)
    if (v != focal || include_focal) out.push_back(v);
  std::sort(out.begin(), out.end());
  return out;
}

double percentile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return kMissing;
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

namespace {
std::string pct_suffix(double p) {
  const double r = std::round(p);
  if (r == p) return "_p" + std::to_string(static_cast<int>(r));
  return "_p" + format_double(p);
}
}  // namespace

Table contextualize(const Table& primary, const ContiguityGraph& graph, const ContextConfig& cfg) {
  std::unordered_map<std::int64_t, std::size_t> row_of_id, node_of_id;
  for (std::size_t r = 0; r < primary.rows(); ++r) row_of_id[primary.ids[r]] = r;
  for (std::size_t n = 0; n < graph.ids.size(); ++n) node_of_id[graph.ids[n]] = n;

  std::vector<std::string> names;
  for (const auto& c : primary.columns)
    for (double p : cfg.percentiles) names.push_back(c + pct_suffix(p));
  Table out(primary.ids, names);
  out.id_name = primary.id_name;
  out.meta = primary.meta;

  const std::size_t m = primary.cols();
  const std::size_t np = cfg.percentiles.size();
  parallel_for(primary.rows(), [&](std::size_t r) {
    auto it = node_of_id.find(primary.ids[r]);
    if (it == node_of_id.end()) throw DataError("cell " + std::to_string(primary.ids[r]) + " missing from graph");
    std::vector<std::size_t> rows;
    for (std::size_t n : within_steps(graph, it->second, cfg.steps, cfg.include_focal)) {
      auto rr = row_of_id.find(graph.ids[n]);
      if (rr != row_of_id.end()) rows.push_back(rr->second);
    }
    std::vector<double> vals;
    for (std::size_t c = 0; c < m; ++c) {
      vals.clear();
      for (std::size_t rr : rows) {
        const double v = primary.at(rr, c);
        if (!missing(v)) vals.push_back(v);
      }
      std::sort(vals.begin(), vals.end());
      for (std::size_t k = 0; k < np; ++k) out.at(r, c * np + k) = percentile_sorted(vals, cfg.percentiles[k]);
    }
  });
  return out;
}

}  // namespace morpholcz
