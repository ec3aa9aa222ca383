// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force primary metrics written from the definitions, sharing no code
// with the library beyond the geometry types. Quadratic or worse; meant for
// scenes of a few dozen objects.

#pragma once

#include <vector>

#include "morpholcz/ingest.hpp"
#include "morpholcz/morphometrics.hpp"
#include "morpholcz/network.hpp"
#include "morpholcz/table.hpp"
#include "morpholcz/tessellation.hpp"

namespace oracle {

struct Shape {
  double area, perimeter, longest_axis, circular_compactness, square_compactness, compactness_weighted_axis,
      convexity, elongation, eri, facade_ratio, fractal_dimension, rectangularity, shape_index, orientation;
};

Shape shape(const morpholcz::geom::MultiPolygon& g);

/// Primary matrix in catalogue order, one row per cell. Cell links
/// (building, nearest street, nearest node) are taken as given.
morpholcz::Table primary(const std::vector<morpholcz::Building>& buildings,
                         const std::vector<morpholcz::EtcCell>& cells, const morpholcz::StreetNetwork& network,
                         const morpholcz::StreetGraph& graph, const morpholcz::ProfileConfig& profile = {});

}  // namespace oracle
