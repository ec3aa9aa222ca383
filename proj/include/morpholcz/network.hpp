// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "morpholcz/geometry.hpp"
#include "morpholcz/ingest.hpp"

namespace morpholcz {

/// Street multigraph: one edge per street segment (edge index == position in
/// StreetNetwork::segments), nodes at snapped segment endpoints in order of
/// first appearance.
struct StreetGraph {
  struct Edge {
    std::int64_t street_id = 0;
    std::size_t u = 0, v = 0;
    double length = 0.0;
  };
  std::vector<geom::Point> nodes;
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> incident;  // edge indices; a self-loop appears twice

  std::size_t degree(std::size_t n) const { return incident[n].size(); }
  std::size_t other(std::size_t e, std::size_t n) const { return edges[e].u == n ? edges[e].v : edges[e].u; }
};

StreetGraph build_graph(const StreetNetwork& net, double snap_tol = 1e-6);

}  // namespace morpholcz
