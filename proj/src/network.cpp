// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/network.hpp"

#include <cmath>
#include <map>

namespace morpholcz {

StreetGraph build_graph(const StreetNetwork& net, double snap_tol) {
  StreetGraph g;
  // Quantised lookup; neighbouring buckets are checked so points within
  // snap_tol of a bucket edge still merge.
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> buckets;
  const double cell = std::max(snap_tol, 1e-12);
  auto node_of = [&](const geom::Point& p) {
    const auto kx = static_cast<std::int64_t>(std::floor(p.x() / cell));
    const auto ky = static_cast<std::int64_t>(std::floor(p.y() / cell));
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = buckets.find({kx + dx, ky + dy});
        if (it == buckets.end()) continue;
        for (std::size_t n : it->second)
          if (geom::dist(g.nodes[n], p) <= snap_tol) return n;
      }
    g.nodes.push_back(p);
    g.incident.emplace_back();
    buckets[{kx, ky}].push_back(g.nodes.size() - 1);
    return g.nodes.size() - 1;
  };
  for (const auto& s : net.segments) {
    StreetGraph::Edge e;
    e.street_id = s.id;
    e.u = node_of(s.line.front());
    e.v = node_of(s.line.back());
    e.length = s.length_m > 0.0 ? s.length_m : geom::line_length(s.line);
    const std::size_t idx = g.edges.size();
    g.edges.push_back(e);
    g.incident[e.u].push_back(idx);
    g.incident[e.v].push_back(idx);
  }
  return g;
}

}  // namespace morpholcz
