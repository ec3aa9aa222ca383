// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "morpholcz/error.hpp"
#include "morpholcz/ingest.hpp"

namespace mg = morpholcz::geom;
namespace io = morpholcz::io;
using fixtures::line;
using fixtures::rect;
using morpholcz::IngestConfig;
using morpholcz::IngestReport;

namespace {
io::FeatureCollection collection(std::vector<io::Geometry> geoms) {
  io::FeatureCollection fc;
  std::int64_t id = 0;
  for (auto& g : geoms) fc.features.push_back({id++, std::move(g), nlohmann::json::object()});
  return fc;
}

double total_area(const std::vector<morpholcz::Building>& bs) {
  double a = 0;
  for (const auto& b : bs) a += mg::bg::area(b.footprint);
  return a;
}
}  // namespace

TEST(Ingest, StackedSquaresMerge) {
  auto out = morpholcz::preprocess_buildings(collection({rect(0, 0, 10, 10), rect(0, 0, 10, 10)}), {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(mg::bg::area(out[0].footprint), 100.0, 1e-9);
}

TEST(Ingest, MultipolygonExplodes) {
  mg::MultiPolygon mp;
  mp.push_back(rect(0, 0, 10, 10));
  mp.push_back(rect(20, 0, 30, 10));
  IngestReport rep;
  auto out = morpholcz::preprocess_buildings(collection({mp}), {}, &rep);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NE(out[0].id, out[1].id);
  EXPECT_NEAR(total_area(out), 200.0, 1e-6);
}

TEST(Ingest, ShedMergesIntoHouse) {
  // House 20 x 25 = 500 m2, shed 2 x 5 = 10 m2 sharing part of its wall.
  // Union area from an exact inclusion-exclusion oracle: 500 + 10 - 0 = 510.
  IngestConfig cfg;
  cfg.small_building_area = 30;
  auto out = morpholcz::preprocess_buildings(collection({rect(0, 0, 20, 25), rect(20, 3, 22, 8)}), cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(mg::bg::area(out[0].footprint), 510.0, 1e-6);
}

TEST(Ingest, PartialOverlapIsTrimmed) {
  // Overlap 2 x 10 = 20 of the smaller 100 m2 square: fraction 0.2 < 0.5.
  IngestReport rep;
  auto out = morpholcz::preprocess_buildings(collection({rect(0, 0, 20, 10), rect(18, 0, 28, 10)}), {}, &rep);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(mg::bg::area(out[0].footprint), 200.0, 1e-9);
  EXPECT_NEAR(mg::bg::area(out[1].footprint), 80.0, 1e-9);
  EXPECT_EQ(rep.counters["overlap_trimmed"], 1);
}

TEST(Ingest, OversizedDropped) {
  IngestConfig cfg;
  cfg.max_building_area = 1000;
  auto out = morpholcz::preprocess_buildings(collection({rect(0, 0, 100, 100), rect(200, 0, 210, 10)}), cfg);
  ASSERT_EQ(out.size(), 1u);
}

TEST(Ingest, NonPolygonsDropped) {
  IngestReport rep;
  auto out = morpholcz::preprocess_buildings(collection({rect(0, 0, 10, 10), mg::Point(1, 1)}), {}, &rep);
  EXPECT_EQ(out.size(), 1u);
  EXPECT_EQ(rep.counters["dropped_non_polygon"], 1);
}

TEST(Ingest, RandomFootprintsEndPairwiseDisjointWithLoggedAreaDeltas) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> pos(0, 150), size(3, 25);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<io::Geometry> geoms;
    double raw_area = 0;
    for (int i = 0; i < 60; ++i) {
      const double x = pos(rng), y = pos(rng);
      auto r = rect(x, y, x + size(rng), y + size(rng));
      raw_area += mg::bg::area(r);
      geoms.push_back(r);
    }
    IngestReport rep;
    auto out = morpholcz::preprocess_buildings(collection(geoms), {}, &rep);
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        mg::MultiPolygon inter;
        mg::bg::intersection(out[i].footprint, out[j].footprint, inter);
        EXPECT_LE(mg::bg::area(inter), 1e-6);
      }
    double delta = 0;
    for (const auto& e : rep.events) delta += e.area_delta;
    EXPECT_NEAR(total_area(out), raw_area + delta, 1e-5);
  }
}

TEST(Ingest, LongTunnelRemoved) {
  io::FeatureCollection fc;
  fc.features.push_back({0, line({{0, 0}, {60, 0}}), {{"is_tunnel", true}}});
  fc.features.push_back({1, line({{0, 50}, {60, 50}}), nlohmann::json::object()});
  auto net = morpholcz::preprocess_streets(fc, {});
  ASSERT_EQ(net.segments.size(), 1u);
  EXPECT_NEAR(net.segments[0].line.front().y(), 50.0, 0);
}

TEST(Ingest, ShortTunnelKept) {
  io::FeatureCollection fc;
  fc.features.push_back({0, line({{0, 0}, {40, 0}}), {{"tunnel", "yes"}}});
  EXPECT_EQ(morpholcz::preprocess_streets(fc, {}).segments.size(), 1u);
}

TEST(Ingest, DegreeTwoChainMerges) {
  auto fc = collection({line({{0, 0}, {10, 0}}), line({{10, 0}, {10, 7}})});
  auto net = morpholcz::preprocess_streets(fc, {});
  ASSERT_EQ(net.segments.size(), 1u);
  EXPECT_NEAR(net.segments[0].length_m, 17.0, 1e-12);
}

TEST(Ingest, DuplicatesRemoved) {
  auto fc = collection({line({{0, 0}, {10, 0}}), line({{10, 0}, {0, 0}})});
  IngestReport rep;
  auto net = morpholcz::preprocess_streets(fc, {}, &rep);
  EXPECT_EQ(net.segments.size(), 1u);
  EXPECT_EQ(rep.counters["removed_duplicate_street"], 1);
}

TEST(Ingest, TJunctionIsNodedAndSnapped) {
  // The stub ends 5 cm off the main line: snapped and the main line split.
  auto fc = collection({line({{0, 0}, {20, 0}}), line({{10, 0.05}, {10, 10}})});
  auto net = morpholcz::preprocess_streets(fc, {});
  EXPECT_EQ(net.segments.size(), 3u);
}

TEST(Ingest, StreetPreprocessingIsIdempotent) {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> c(0, 8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<io::Geometry> lines;
    for (int i = 0; i < 14; ++i) {
      const int a = c(rng) * 10, b = c(rng) * 10, d = c(rng) * 10;
      if (a == b) continue;
      lines.push_back(i % 2 ? line({{double(a), double(d)}, {double(b), double(d)}})
                            : line({{double(d), double(a)}, {double(d), double(b)}}));
    }
    if (lines.empty()) continue;
    auto once = morpholcz::preprocess_streets(collection(lines), {});
    auto twice = morpholcz::preprocess_streets(once, {});
    ASSERT_EQ(once.segments.size(), twice.segments.size());
    for (std::size_t i = 0; i < once.segments.size(); ++i)
      EXPECT_TRUE(mg::bg::equals(once.segments[i].line, twice.segments[i].line));
  }
}

TEST(Ingest, EmptyNetworkFails) {
  io::FeatureCollection fc;
  fc.features.push_back({0, line({{0, 0}, {80, 0}}), {{"is_tunnel", true}}});
  EXPECT_THROW(morpholcz::preprocess_streets(fc, {}), morpholcz::DataError);
}

TEST(Ingest, ConsistencyRemovesStraddlingBuilding) {
  std::vector<morpholcz::Building> bs = {{0, rect(-5, -5, 5, 5)}, {1, rect(20, 20, 30, 30)}};
  morpholcz::StreetNetwork net;
  net.segments.push_back({0, line({{-50, 0}, {50, 0}}), false, 100});
  auto res = morpholcz::consistency_check(bs, net, {}, {});
  ASSERT_EQ(res.buildings.size(), 1u);
  EXPECT_EQ(res.buildings[0].id, 1);
}

TEST(Ingest, ConsistencyRemovesWaterlineThroughBuilding) {
  std::vector<morpholcz::Building> bs = {{0, rect(0, 0, 10, 10)}};
  morpholcz::StreetNetwork net;
  net.segments.push_back({0, line({{-50, 50}, {50, 50}}), false, 100});
  std::vector<mg::LineString> water = {line({{5, -20}, {5, 30}}), line({{40, -20}, {40, 30}})};
  auto res = morpholcz::consistency_check(bs, net, water, {});
  EXPECT_EQ(res.buildings.size(), 1u);
  ASSERT_EQ(res.waterlines.size(), 1u);
  EXPECT_EQ(res.removed_waterlines, std::vector<std::size_t>{0});
}

TEST(Ingest, ConsistencyRemovesBuildingInWaterbody) {
  std::vector<morpholcz::Building> bs = {{0, rect(0, 0, 10, 10)}, {1, rect(100, 0, 110, 10)}};
  morpholcz::StreetNetwork net;
  auto res = morpholcz::consistency_check(bs, net, {}, {rect(5, 5, 50, 50)});
  ASSERT_EQ(res.buildings.size(), 1u);
  EXPECT_EQ(res.buildings[0].id, 1);
}

TEST(Ingest, ConsistencyKeepsDisjointLayers) {
  std::vector<morpholcz::Building> bs = {{0, rect(0, 0, 10, 10)}};
  morpholcz::StreetNetwork net;
  net.segments.push_back({0, line({{-50, 20}, {50, 20}}), false, 100});
  // A street along the facade only touches the boundary.
  net.segments.push_back({1, line({{-50, 10}, {50, 10}}), false, 100});
  auto res = morpholcz::consistency_check(bs, net, {line({{-5, -5}, {-5, 30}})}, {rect(50, 50, 60, 60)});
  EXPECT_EQ(res.buildings.size(), 1u);
  EXPECT_EQ(res.waterlines.size(), 1u);
}
