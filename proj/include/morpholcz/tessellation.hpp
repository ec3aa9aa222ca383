// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "morpholcz/geometry.hpp"
#include "morpholcz/ingest.hpp"
#include "morpholcz/network.hpp"

namespace morpholcz {

struct Enclosure {
  std::int64_t id = 0;
  geom::Polygon polygon;
};

/// One cell per retained building; the cell id equals the building id.
/// Cells can be multi-part when an enclosure pinches.
struct EtcCell {
  std::int64_t id = 0;
  geom::MultiPolygon polygon;
  std::int64_t building_id = 0;
  std::int64_t enclosure_id = 0;
  std::optional<std::int64_t> nearest_street_id;
  std::optional<std::int64_t> nearest_node_id;
  std::optional<std::int64_t> nearest_edge_id;
};

struct TessellationConfig {
  double segment_len = 0.5;  // boundary densification step, m
  double shrink = 0.4;       // inward footprint offset, m
};

struct TessellationLog {
  std::vector<std::int64_t> centroid_fallback;  // buildings whose shrink vanished
  std::vector<std::int64_t> outside;            // buildings in no enclosure
};

/// Faces of the arrangement of all barrier lines and the study-area ring,
/// restricted to the study area and excluding waterbody interiors. Throws
/// DataError for a degenerate study area.
std::vector<Enclosure> build_enclosures(const StreetNetwork& streets, const std::vector<geom::LineString>& waterlines,
                                        const std::vector<geom::Polygon>& waterbodies,
                                        const geom::Polygon& study_area);

/// Enclosure holding the largest share of each footprint; nullopt when the
/// footprint meets no enclosure.
std::vector<std::optional<std::size_t>> assign_enclosures(const std::vector<Building>& buildings,
                                                          const std::vector<Enclosure>& enclosures);

std::vector<EtcCell> tessellate(const std::vector<Building>& buildings, const std::vector<Enclosure>& enclosures,
                                const TessellationConfig& cfg = {}, TessellationLog* log = nullptr);

/// Fills the nearest street / node / edge links. Distances are measured from
/// the building footprint; candidates within `snap_tol` of the minimum tie
/// and the lowest id wins. An empty network leaves the links empty.
void link_elements(std::vector<EtcCell>& cells, const std::vector<Building>& buildings, const StreetNetwork& network,
                   const StreetGraph& graph, double snap_tol = 0.1);

}  // namespace morpholcz
