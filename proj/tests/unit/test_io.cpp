// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "morpholcz/error.hpp"
#include "morpholcz/io_vector.hpp"
#include "morpholcz/table.hpp"

namespace io = morpholcz::io;
using fixtures::rect;

namespace {
void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

const char* kMixed = R"({"type":"FeatureCollection","features":[
 {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
 {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[2,0],[3,0],[3,1],[2,1],[2,0]]]}},
 {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[4,0],[5,0],[5,1],[4,1],[4,0]]]}},
 {"type":"Feature","properties":{},"geometry":{"type":"Point","coordinates":[9,9]}}]})";
}  // namespace

TEST(Io, TypeFilterCountsDrops) {
  auto d = fixtures::temp_dir("io_mixed");
  write_text(d / "b.geojson", kMixed);
  auto fc = io::load_layer(d / "b.geojson", io::LayerKind::buildings);
  EXPECT_EQ(fc.features.size(), 3u);
  EXPECT_EQ(fc.dropped, 1u);
}

TEST(Io, GeographicCrsRejected) {
  auto d = fixtures::temp_dir("io_crs");
  std::string doc = kMixed;
  doc.insert(1, R"("crs":{"type":"name","properties":{"name":"urn:ogc:def:crs:EPSG::4326"}},)");
  write_text(d / "b.geojson", doc);
  try {
    io::load_layer(d / "b.geojson", io::LayerKind::buildings);
    FAIL() << "expected DataError";
  } catch (const morpholcz::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("projected CRS required"), std::string::npos);
  }
}

TEST(Io, EmptyAndMissingLayersFail) {
  auto d = fixtures::temp_dir("io_empty");
  write_text(d / "e.geojson", R"({"type":"FeatureCollection","features":[]})");
  EXPECT_THROW(io::load_layer(d / "e.geojson", io::LayerKind::buildings), morpholcz::DataError);
  EXPECT_THROW(io::load_layer(d / "nope.geojson", io::LayerKind::buildings), morpholcz::DataError);
  write_text(d / "bad.geojson", "{not json");
  EXPECT_THROW(io::load_layer(d / "bad.geojson", io::LayerKind::buildings), morpholcz::DataError);
}

TEST(Io, ServiceRoadsDroppedAtLoad) {
  auto d = fixtures::temp_dir("io_service");
  write_text(d / "s.geojson", R"({"type":"FeatureCollection","features":[
 {"type":"Feature","properties":{"class":"residential"},"geometry":{"type":"LineString","coordinates":[[0,0],[10,0]]}},
 {"type":"Feature","properties":{"class":"service"},"geometry":{"type":"LineString","coordinates":[[0,5],[10,5]]}}]})");
  auto fc = io::load_layer(d / "s.geojson", io::LayerKind::streets);
  EXPECT_EQ(fc.features.size(), 1u);
  EXPECT_EQ(fc.dropped, 1u);
}

TEST(Io, GeoPackageRoundTrip) {
  auto d = fixtures::temp_dir("io_gpkg");
  io::FeatureCollection fc;
  fc.crs.epsg = 32633;
  io::Feature f;
  f.id = 7;
  auto p = rect(0, 0, 10, 5);
  p.inners().push_back(rect(2, 2, 3, 3).outer());
  std::reverse(p.inners().back().begin(), p.inners().back().end());
  f.geometry = p;
  f.properties = {{"lcz", 3}, {"name", "a"}, {"w", 1.5}};
  fc.features.push_back(f);
  io::Feature g;
  g.id = 8;
  g.geometry = fixtures::line({{0, 0}, {1, 1}, {2, 0}});
  fc.features.push_back(g);
  io::write_layer(d / "x.gpkg", fc);
  auto back = io::read_layer(d / "x.gpkg");
  ASSERT_EQ(back.features.size(), 2u);
  EXPECT_EQ(back.features[0].id, 7);
  EXPECT_EQ(back.crs.epsg.value_or(0), 32633);
  EXPECT_NEAR(morpholcz::geom::bg::area(std::get<io::Polygon>(back.features[0].geometry)), 49.0, 1e-12);
  EXPECT_EQ(back.features[0].properties["lcz"], 3);
  EXPECT_EQ(back.features[0].properties["name"], "a");
  EXPECT_EQ(std::get<io::LineString>(back.features[1].geometry).size(), 3u);
}

TEST(Io, GeoJsonRoundTrip) {
  auto d = fixtures::temp_dir("io_geojson");
  io::FeatureCollection fc;
  io::Feature f;
  io::MultiPolygon mp;
  mp.push_back(rect(0, 0, 1, 1));
  mp.push_back(rect(5, 5, 7, 7));
  f.geometry = mp;
  fc.features.push_back(f);
  io::write_layer(d / "x.geojson", fc);
  auto back = io::read_layer(d / "x.geojson");
  ASSERT_EQ(back.features.size(), 1u);
  EXPECT_NEAR(morpholcz::geom::bg::area(std::get<io::MultiPolygon>(back.features[0].geometry)), 5.0, 1e-12);
}

TEST(Io, WkbRoundTrip) {
  io::Geometry g = rect(0, 0, 2, 3);
  auto wkb = io::to_wkb(g);
  auto back = io::from_wkb(wkb.data(), wkb.size());
  EXPECT_TRUE(morpholcz::geom::bg::equals(std::get<io::Polygon>(back), std::get<io::Polygon>(g)));
}

TEST(Table, CsvRoundTripPreservesMissingAndBits) {
  auto d = fixtures::temp_dir("table");
  morpholcz::Table t({3, 1, 2}, {"a", "b"});
  t.at(0, 0) = 0.1;
  t.at(0, 1) = 1.0 / 3.0;
  t.at(1, 0) = -1e-300;
  t.at(2, 1) = 12345678.9;
  t.meta["seed"] = "42";
  morpholcz::write_csv(d / "t.csv", t);
  auto back = morpholcz::read_csv(d / "t.csv");
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.meta.at("seed"), "42");
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    if (std::isnan(t.values[i]))
      EXPECT_TRUE(std::isnan(back.values[i]));
    else
      EXPECT_EQ(back.values[i], t.values[i]);
  }
}
