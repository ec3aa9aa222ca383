// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "morpholcz/error.hpp"
#include "morpholcz/evaluation.hpp"

namespace mg = morpholcz::geom;
using fixtures::poly;
using fixtures::rect;
using morpholcz::EtcCell;
using morpholcz::ReferencePolygon;

namespace {

EtcCell cell(std::int64_t id, const mg::Polygon& p) {
  EtcCell c;
  c.id = id;
  c.building_id = id;
  c.polygon = mg::to_multi(p);
  return c;
}

double max_load(const std::vector<double>& w, const std::vector<int>& f, int k) {
  std::vector<double> load(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) load[static_cast<std::size_t>(f[i])] += w[i];
  return *std::max_element(load.begin(), load.end());
}

// Best achievable maximum fold load by enumerating every assignment.
double best_partition(const std::vector<double>& w, int k) {
  std::vector<int> f(w.size(), 0);
  double best = INFINITY;
  while (true) {
    best = std::min(best, max_load(w, f, k));
    std::size_t i = 0;
    while (i < f.size() && ++f[i] == k) f[i++] = 0;
    if (i == f.size()) break;
  }
  return best;
}

}  // namespace

TEST(Scores, SmallCase) {
  const auto s = morpholcz::scores({1, 1, 2, 2}, {1, 2, 2, 2});
  EXPECT_DOUBLE_EQ(s.oa, 0.75);
  EXPECT_NEAR(s.f1_class.at(1), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.f1_class.at(2), 0.8, 1e-12);
  EXPECT_NEAR(s.f1, (2.0 / 3.0 + 0.8) / 2.0, 1e-12);
  EXPECT_NEAR(s.f1u, s.f1, 1e-12);
  EXPECT_TRUE(std::isnan(s.f1n));
  EXPECT_EQ(s.confusion[0][1], 1);
}

TEST(Scores, RandomAgainstHandOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> cls(1, 17), len(20, 200);
    const int n = len(rng);
    std::vector<int> t(static_cast<std::size_t>(n)), p(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = cls(rng);
      p[i] = rng() % 3 == 0 ? t[i] : cls(rng);
    }
    const auto s = morpholcz::scores(t, p);
    double wsum = 0, w = 0, usum = 0, u = 0, nsum = 0, nn = 0;
    int correct = 0;
    for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
    for (int c = 1; c <= 17; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        tp += t[i] == c && p[i] == c;
        fp += t[i] != c && p[i] == c;
        fn += t[i] == c && p[i] != c;
      }
      const double f = tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
      const double sup = tp + fn;
      if (tp + fp + fn > 0) {
        EXPECT_NEAR(s.f1_class.at(c), f, 1e-12);
      }
      wsum += sup * f, w += sup;
      if (c <= 10) usum += sup * f, u += sup;
      else nsum += sup * f, nn += sup;
    }
    EXPECT_NEAR(s.oa, static_cast<double>(correct) / n, 1e-12);
    EXPECT_NEAR(s.f1, wsum / w, 1e-12);
    if (u > 0) {
      EXPECT_NEAR(s.f1u, usum / u, 1e-12);
    }
    if (nn > 0) {
      EXPECT_NEAR(s.f1n, nsum / nn, 1e-12);
    }
  }
}

TEST(Scores, PermutationInvariant) {
  std::vector<int> t = {1, 2, 3, 11, 12, 1, 2, 2, 11, 3, 3, 6};
  std::vector<int> p = {1, 3, 3, 11, 11, 1, 2, 6, 12, 3, 2, 6};
  const auto a = morpholcz::scores(t, p);
  std::vector<std::size_t> perm(t.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  std::vector<int> t2, p2;
  for (auto i : perm) t2.push_back(t[i]), p2.push_back(p[i]);
  const auto b = morpholcz::scores(t2, p2);
  EXPECT_DOUBLE_EQ(a.oa, b.oa);
  EXPECT_DOUBLE_EQ(a.f1, b.f1);
  EXPECT_DOUBLE_EQ(a.f1u, b.f1u);
  EXPECT_DOUBLE_EQ(a.f1n, b.f1n);
  EXPECT_EQ(a.confusion, b.confusion);
}

TEST(Scores, RejectsBadInput) {
  EXPECT_THROW(morpholcz::scores({}, {}), morpholcz::DataError);
  EXPECT_THROW(morpholcz::scores({1}, {1, 2}), morpholcz::DataError);
}

TEST(Report, AggregatesFolds) {
  const auto a = morpholcz::scores({1, 1, 2, 2}, {1, 2, 2, 2});
  const auto b = morpholcz::scores({1, 11, 11}, {1, 11, 1});
  const auto r = morpholcz::aggregate_report({a, b});
  EXPECT_NEAR(r.oa, (0.75 + 2.0 / 3.0) / 2, 1e-12);
  EXPECT_NEAR(r.f1n, b.f1n, 1e-12);  // fold a has no natural support
  EXPECT_NEAR(r.spread.at("oa").best - r.spread.at("oa").worst, 0.75 - 2.0 / 3.0, 1e-12);
  ASSERT_EQ(r.classes, (std::vector<int>{1, 2, 11}));
  std::int64_t total = 0;
  for (const auto& row : r.confusion)
    for (auto v : row) total += v;
  EXPECT_EQ(total, 7);
  EXPECT_EQ(r.confusion[2][0], 1);
  const auto dir = fixtures::temp_dir("report");
  r.write_confusion_csv(dir / "c.csv");
  std::ifstream f(dir / "c.csv");
  std::string head;
  std::getline(f, head);
  EXPECT_EQ(head, "true\\pred,1,2,A");
  EXPECT_TRUE(r.to_json()["f1u"].is_number());
}

TEST(Folds, LptMatchesExhaustiveOracle) {
  const std::vector<double> w = {10, 9, 1, 1, 1, 1, 1};
  const auto f = morpholcz::lpt_assign(w, 2, 1);
  EXPECT_DOUBLE_EQ(max_load(w, f, 2), 12.0);
  EXPECT_DOUBLE_EQ(best_partition(w, 2), 12.0);
  const auto f5 = morpholcz::lpt_assign(w, 5, 1);
  EXPECT_DOUBLE_EQ(max_load(w, f5, 5), 10.0);
  EXPECT_DOUBLE_EQ(best_partition(w, 5), 10.0);
}

TEST(Folds, LptWithinFourThirdsOfOptimum) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_real_distribution<double> u(1, 50);
    std::vector<double> w(8);
    for (auto& x : w) x = std::round(u(rng));
    const int k = 2 + trial % 2;
    const auto f = morpholcz::lpt_assign(w, k, static_cast<std::uint64_t>(trial));
    EXPECT_LE(max_load(w, f, k), best_partition(w, k) * (4.0 / 3.0) + 1e-9);
  }
}

TEST(Folds, StratifiedPerClass) {
  std::vector<ReferencePolygon> refs;
  for (int i = 0; i < 12; ++i) refs.push_back({i, rect(i * 10, 0, i * 10 + 5, 5), i < 6 ? 2 : 11, double(1 + i % 4), 1});
  const auto fa = morpholcz::stratified_folds(refs, morpholcz::Stratification::etc_count, 3, 5);
  ASSERT_EQ(fa.fold.size(), 12U);
  for (int c : {2, 11}) {
    std::set<int> used;
    for (const auto& r : refs)
      if (r.lcz == c) used.insert(fa.fold.at(r.id));
    EXPECT_EQ(used.size(), 3U);
  }
  const auto again = morpholcz::stratified_folds(refs, morpholcz::Stratification::etc_count, 3, 5);
  EXPECT_EQ(fa.fold, again.fold);
  refs.push_back({99, rect(0, 50, 5, 55), 14, 1, 1});
  EXPECT_THROW(morpholcz::stratified_folds(refs, morpholcz::Stratification::area, 3, 5), morpholcz::DataError);
}

TEST(Split, LShapeHalves) {
  const auto l = poly({{0, 0}, {40, 0}, {40, 10}, {10, 10}, {10, 30}, {0, 30}, {0, 0}});
  std::vector<ReferencePolygon> refs = {{3, l, 4, 0, 0}, {8, rect(100, 0, 110, 10), 2, 0, 0},
                                        {9, rect(120, 0, 130, 10), 2, 0, 0}};
  const auto out = morpholcz::split_singletons(refs);
  ASSERT_EQ(out.size(), 4U);
  const double a = mg::bg::area(out[0].polygon), b = mg::bg::area(out[1].polygon);
  EXPECT_EQ(out[0].id, 3);
  EXPECT_EQ(out[1].id, 10);
  EXPECT_EQ(out[1].lcz, 4);
  EXPECT_NEAR(a, b, 0.01 * (a + b) / 2);
  EXPECT_NEAR(a + b, mg::bg::area(l), 1e-6);
}

TEST(Split, CutPerpendicularToLongSide) {
  const auto r = rect(0, 0, 100, 10);
  const auto parts = morpholcz::bisect_polygon(r, 0.0);
  ASSERT_TRUE(parts.has_value());
  const auto e = mg::envelope(parts->first);
  EXPECT_NEAR(e.max_corner().x() - e.min_corner().x(), 50.0, 1e-3);
  EXPECT_NEAR(e.max_corner().y() - e.min_corner().y(), 10.0, 1e-6);
}

TEST(Labels, ByCentroidAndOverlap) {
  std::vector<morpholcz::Building> bs = {{1, rect(2, 2, 8, 8)}, {2, rect(12, 2, 18, 8)}, {3, rect(52, 2, 58, 8)}};
  std::vector<EtcCell> cells = {cell(1, rect(0, 0, 10, 10)), cell(2, rect(10, 0, 20, 10)), cell(3, rect(50, 0, 60, 10))};
  std::vector<ReferencePolygon> refs = {{1, rect(0, 0, 11, 10), 2, 0, 0}, {2, rect(11, 0, 30, 10), 6, 0, 0}};
  const auto a = morpholcz::label_etcs(cells, bs, refs);
  EXPECT_EQ(a.label[0], 2);
  EXPECT_EQ(a.label[1], 6);
  EXPECT_FALSE(a.label[2].has_value());
  morpholcz::count_etcs(refs, a);
  EXPECT_DOUBLE_EQ(refs[0].weight_etc, 1.0);
  const auto b = morpholcz::label_etcs(cells, bs, refs, true);
  EXPECT_EQ(b.label[1], 6);
  EXPECT_EQ(b.reference[0], 0U);
}

TEST(Grid, MajorityByAreaTiesToLowerClass) {
  morpholcz::GridSpec px;
  px.x0 = 0;
  px.y0 = 200;
  px.width = 20;
  px.height = 20;
  const auto g = morpholcz::make_grid100(px);
  // top-left cell: two halves of equal area; top-right: 70/30 split
  std::vector<EtcCell> cells = {cell(1, rect(0, 100, 50, 200)), cell(2, rect(50, 100, 100, 200)),
                                cell(3, rect(100, 100, 170, 200)), cell(4, rect(170, 100, 200, 200))};
  std::vector<std::optional<int>> labels = {6, 3, 9, 2};
  const auto out = morpholcz::s1_to_grid(cells, labels, g);
  EXPECT_EQ(out[0], 3);
  EXPECT_EQ(out[1], 9);
  EXPECT_EQ(out[2], 0);
  EXPECT_EQ(out[3], 0);
}

TEST(Maps, EmitsFilesAndLegend) {
  morpholcz::GridSpec px;
  px.x0 = 0;
  px.y0 = 200;
  px.width = 20;
  px.height = 20;
  px.epsg = 32633;
  const auto g = morpholcz::make_grid100(px);
  const auto dir = fixtures::temp_dir("maps");
  const auto m = morpholcz::emit_grid_map({6, 0, 11, 6}, g, dir / "grid");
  EXPECT_TRUE(std::filesystem::exists(m.data));
  EXPECT_TRUE(std::filesystem::exists(m.png));
  std::ifstream f(m.legend);
  const auto j = nlohmann::json::parse(f);
  ASSERT_EQ(j["classes"].size(), 2U);
  EXPECT_EQ(j["classes"][0]["code"], 6);
  const auto r = morpholcz::read_geotiff(m.data);
  EXPECT_EQ(r.grid.width, 2U);
  EXPECT_DOUBLE_EQ(r.at(0, 0, 1), 11.0);
  EXPECT_TRUE(std::isnan(r.at(0, 1, 0)));

  std::vector<EtcCell> cells = {cell(1, rect(0, 0, 100, 100)), cell(2, rect(100, 0, 200, 100))};
  morpholcz::io::Crs crs;
  const auto c = morpholcz::emit_cell_map(cells, {2, std::nullopt}, crs, px, dir / "cells");
  const auto fc = morpholcz::io::read_layer(c.data);
  ASSERT_EQ(fc.features.size(), 2U);
  EXPECT_EQ(fc.features[0].properties["lcz"], 2);
  EXPECT_TRUE(fc.features[1].properties["lcz"].is_null());
}
