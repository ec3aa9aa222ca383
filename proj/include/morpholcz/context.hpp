// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "morpholcz/table.hpp"
#include "morpholcz/tessellation.hpp"

namespace morpholcz {

/// Queen contiguity between cells (any shared boundary point). Indices refer
/// to positions in the cell vector; neighbour lists are sorted.
struct ContiguityGraph {
  std::vector<std::int64_t> ids;
  std::vector<std::vector<std::size_t>> adj;

  std::size_t size() const { return adj.size(); }
  std::size_t edge_count() const;
};

ContiguityGraph build_contiguity(const std::vector<EtcCell>& cells, double tol = 1e-6);

/// Cells reachable in 1..steps hops, sorted, focal cell included on request.
std::vector<std::size_t> within_steps(const ContiguityGraph& g, std::size_t focal, int steps, bool include_focal);

/// Linear-interpolation percentile (position p/100 * (n-1) in sorted order);
/// NaN for an empty input. `sorted` must be ascending.
double percentile_sorted(const std::vector<double>& sorted, double p);

struct ContextConfig {
  int steps = 3;
  std::vector<double> percentiles = {25.0, 50.0, 75.0};
  bool include_focal = true;
};

/// One column per (metric, percentile), named `<metric>_p<P>`, metric-major.
/// Rows follow `primary`; each row id must exist in the graph.
Table contextualize(const Table& primary, const ContiguityGraph& graph, const ContextConfig& cfg = {});

inline constexpr std::size_t kContextColumns = 321;

}  // namespace morpholcz
