// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morpholcz/context.hpp"
#include "morpholcz/geometry.hpp"
#include "morpholcz/ingest.hpp"
#include "morpholcz/network.hpp"
#include "morpholcz/table.hpp"
#include "morpholcz/tessellation.hpp"

namespace morpholcz {

enum class Element { building, etc, street, node };
enum class Family { dimension, shape, distribution, intensity, connectivity };

struct MetricInfo {
  std::string name;
  Element element;
  Family family;
  std::string scale;  // none, dist20/100/200, knn10/20/30, topo1/2/3, rad5/rad400
};

inline constexpr std::size_t kPrimaryMetrics = 107;

/// The primary metric catalogue in column order.
const std::vector<MetricInfo>& metric_catalog();
nlohmann::json catalog_json();
std::string to_string(Element e);
std::string to_string(Family f);

// ---- per-geometry shape characters ----

struct ShapeMetrics {
  double area = kMissing;
  double perimeter = kMissing;
  double longest_axis = kMissing;
  double circular_compactness = kMissing;
  double square_compactness = kMissing;
  double compactness_weighted_axis = kMissing;
  double convexity = kMissing;
  double elongation = kMissing;
  double eri = kMissing;
  double facade_ratio = kMissing;
  double fractal_dimension = kMissing;
  double rectangularity = kMissing;
  double shape_index = kMissing;
  double orientation = kMissing;  // long MRR side, degrees in [0, 90)
};

ShapeMetrics shape_metrics(const geom::MultiPolygon& g);
ShapeMetrics shape_metrics(const geom::Polygon& p);

/// Area-weighted mean of `values` over each neighbourhood (lists must include
/// the focal object). Missing values are skipped; if nothing remains the
/// focal value is returned.
std::vector<double> area_weighted(const std::vector<double>& values, const std::vector<double>& areas,
                                  const std::vector<std::vector<std::size_t>>& neighbourhoods);

/// Objects whose centroid lies within `radius` of each centroid, focal
/// excluded, sorted by index.
std::vector<std::vector<std::size_t>> distance_band(const std::vector<geom::Point>& centroids, double radius);

/// Fold |a - b| onto [0, 45] for orientations in degrees.
double alignment_deviation(double building_deg, double street_deg);

/// Azimuth of the chord between a line's endpoints, degrees in [0, 90).
double street_orientation(const geom::LineString& line);

struct StreetProfile {
  double width = kMissing;
  double width_deviation = kMissing;
  double openness = kMissing;
};

struct ProfileConfig {
  double tick_len = 50.0;
  double tick_spacing = 10.0;
};

/// Perpendicular ray casting against building footprints.
class ProfileCaster {
 public:
  explicit ProfileCaster(const std::vector<Building>& buildings);
  ~ProfileCaster();
  ProfileCaster(const ProfileCaster&) = delete;
  ProfileCaster& operator=(const ProfileCaster&) = delete;
  StreetProfile profile(const geom::LineString& line, const ProfileConfig& cfg) const;
  /// Distance to the first footprint boundary along a ray, or nullopt.
  std::optional<double> cast(const geom::Point& from, double dx, double dy, double max_len) const;

 private:
  struct Impl;
  Impl* impl_;
};

/// Per-node connectivity characters on the subgraph within network distance
/// `radius` of each node. Subgraph characters are missing when the subgraph
/// is the node alone.
struct NodeMetrics {
  std::vector<double> degree;
  std::vector<double> mean_distance;
  std::vector<double> clustering;
  // Radius-dependent:
  std::vector<double> mean_degree, density, edge_node_ratio, cds_length, cyclomatic, gamma, meshedness;
};

NodeMetrics node_metrics(const StreetGraph& g, double radius);
/// Square clustering per node (simple-graph view: parallel edges collapsed,
/// self-loops ignored).
std::vector<double> square_clustering(const StreetGraph& g);
/// Nodes within network distance `radius` of `source` (Dijkstra), sorted.
std::vector<std::size_t> ego_nodes(const StreetGraph& g, std::size_t source, double radius);

struct MorphoConfig {
  ProfileConfig profile;
  double touch_tol = 1e-6;  // buildings closer than this are joined
};

/// Per-object values for every catalogue entry, indexed like the catalogue.
/// Each vector is sized by its element: buildings, cells, streets or nodes.
struct MetricColumns {
  std::vector<std::int64_t> building_ids;
  std::vector<std::int64_t> street_ids;
  std::vector<std::vector<double>> by_metric;
};

MetricColumns compute_metrics(const std::vector<Building>& buildings, const std::vector<EtcCell>& cells,
                              const ContiguityGraph& contiguity, const StreetNetwork& network, const StreetGraph& graph,
                              const MorphoConfig& cfg = {});

/// Joins per-object columns onto cells: building metrics by building id,
/// street metrics by nearest street, node metrics by nearest node. Throws
/// DataError if the column count differs from the catalogue.
Table assemble_primary(const std::vector<EtcCell>& cells, const MetricColumns& cols);

/// compute_metrics followed by assemble_primary.
Table primary_matrix(const std::vector<Building>& buildings, const std::vector<EtcCell>& cells,
                     const ContiguityGraph& contiguity, const StreetNetwork& network, const StreetGraph& graph,
                     const MorphoConfig& cfg = {});

}  // namespace morpholcz
