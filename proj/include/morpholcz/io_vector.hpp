// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "morpholcz/geometry.hpp"

namespace morpholcz::io {

using geom::LineString;
using geom::MultiLineString;
using geom::MultiPolygon;
using geom::Point;
using geom::Polygon;
using MultiPoint = geom::bg::model::multi_point<Point>;

using Geometry = std::variant<Point, LineString, Polygon, MultiPoint, MultiLineString, MultiPolygon>;

struct Crs {
  std::optional<int> epsg;
  std::string name;  // raw identifier or WKT as found in the file
  bool geographic = false;
  bool declared() const { return epsg.has_value() || !name.empty(); }
};

struct Feature {
  std::int64_t id = 0;
  Geometry geometry;
  nlohmann::json properties = nlohmann::json::object();
};

struct FeatureCollection {
  std::vector<Feature> features;
  Crs crs;
  std::size_t dropped = 0;  // features removed by the kind filter
  nlohmann::json meta = nlohmann::json::object();  // GeoJSON only: top-level "meta" member
};

enum class LayerKind { buildings, streets, waterlines, waterbodies, reference, study_area, cells, generic };

LayerKind parse_layer_kind(const std::string& s);
std::string to_string(LayerKind k);

/// Raw read of a GeoJSON (.geojson/.json) or GeoPackage (.gpkg) file.
FeatureCollection read_layer(const std::filesystem::path& path);

/// Read, check CRS and filter geometry types for `kind`. Throws DataError
/// for unreadable files, geographic CRS ("projected CRS required") and
/// empty layers. Street features with class "service" are dropped.
FeatureCollection load_layer(const std::filesystem::path& path, LayerKind kind);

/// Write by extension: GeoJSON or GeoPackage.
void write_layer(const std::filesystem::path& path, const FeatureCollection& fc,
                 const std::string& layer_name = "features");

nlohmann::json geometry_to_geojson(const Geometry& g);
Geometry geometry_from_geojson(const nlohmann::json& j);

std::vector<std::uint8_t> to_wkb(const Geometry& g);
Geometry from_wkb(const std::uint8_t* data, std::size_t size);

/// Flatten polygonal geometry into parts; empty for other types.
std::vector<Polygon> polygon_parts(const Geometry& g);
/// Flatten linear geometry into parts; empty for other types.
std::vector<LineString> line_parts(const Geometry& g);

}  // namespace morpholcz::io
