// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morpholcz/geometry.hpp"
#include "morpholcz/io_vector.hpp"

namespace morpholcz {

struct IngestConfig {
  double max_building_area = 200000.0;  // m^2
  double simplify_tol = 0.5;            // m
  double merge_overlap_frac = 0.5;
  double small_building_area = 30.0;  // m^2
  double snap_tol = 0.1;              // m
  double max_tunnel_length = 50.0;    // m; longer tunnels are removed
  bool skip_simplify = false;         // street network already simplified upstream
};

struct Building {
  std::int64_t id = 0;
  geom::Polygon footprint;
};

struct StreetSegment {
  std::int64_t id = 0;
  geom::LineString line;
  bool is_tunnel = false;
  double length_m = 0.0;
};

struct StreetNetwork {
  std::vector<StreetSegment> segments;
};

/// Per-rule counters plus the area delta of every event that changed the
/// building stock.
struct IngestReport {
  struct Event {
    std::string rule;
    std::int64_t id = 0;
    double area_delta = 0.0;
  };
  std::map<std::string, std::int64_t> counters;
  std::vector<Event> events;

  void count(const std::string& rule, std::int64_t n = 1) { counters[rule] += n; }
  void event(const std::string& rule, std::int64_t id, double area_delta) {
    counters[rule] += 1;
    events.push_back({rule, id, area_delta});
  }
  nlohmann::json to_json() const;
};

std::vector<Building> preprocess_buildings(const io::FeatureCollection& raw, const IngestConfig& cfg,
                                           IngestReport* report = nullptr);

/// Throws DataError when no segment survives filtering.
StreetNetwork preprocess_streets(const io::FeatureCollection& raw, const IngestConfig& cfg,
                                 IngestReport* report = nullptr);

/// Same as above for already-extracted segments (used for idempotence).
StreetNetwork preprocess_streets(const StreetNetwork& in, const IngestConfig& cfg, IngestReport* report = nullptr);

struct ConsistencyResult {
  std::vector<Building> buildings;
  std::vector<geom::LineString> waterlines;
  std::vector<std::int64_t> removed_buildings;
  std::vector<std::size_t> removed_waterlines;  // indices into the input
};

/// Removes buildings whose interior meets a street centreline or a waterbody
/// interior, then waterlines touching any remaining building.
ConsistencyResult consistency_check(const std::vector<Building>& buildings, const StreetNetwork& streets,
                                    const std::vector<geom::LineString>& waterlines,
                                    const std::vector<geom::Polygon>& waterbodies, IngestReport* report = nullptr);

bool is_tunnel_feature(const nlohmann::json& props);

}  // namespace morpholcz
