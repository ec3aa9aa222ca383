// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <map>
#include <random>
#include <set>

#include "acceptance.hpp"
#include "metric_oracle.hpp"
#include "morpholcz/context.hpp"
#include "morpholcz/morphometrics.hpp"
#include "morpholcz/tessellation.hpp"

namespace acceptance {

namespace bg = boost::geometry;
namespace mg = morpholcz::geom;
using morpholcz::Building;

namespace {

mg::Polygon ring_polygon(std::vector<std::pair<double, double>> pts, std::vector<std::pair<double, double>> hole = {}) {
  mg::Polygon p;
  for (auto [x, y] : pts) p.outer().emplace_back(x, y);
  if (!hole.empty()) {
    p.inners().emplace_back();
    for (auto [x, y] : hole) p.inners().back().emplace_back(x, y);
  }
  bg::correct(p);
  return p;
}

mg::Polygon rotated_rect(double cx, double cy, double w, double h, double deg) {
  const double c = std::cos(deg * M_PI / 180), s = std::sin(deg * M_PI / 180);
  std::vector<std::pair<double, double>> pts;
  for (auto [u, v] : {std::pair{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}})
    pts.emplace_back(cx + c * u - s * v, cy + s * u + c * v);
  return ring_polygon(pts);
}

// 200 m square split into two street blocks, with a dead end reaching into
// the right block and a chain of 3 m segments so that the 5 m network radius
// holds more than one node. Twelve segments and twenty buildings including a
// shared wall, a courtyard, an L, a rotated footprint and one building whose
// nearest node is the middle of the chain.
struct Scene {
  std::vector<Building> buildings;
  morpholcz::StreetNetwork net;
  morpholcz::StreetGraph graph;
  std::vector<morpholcz::EtcCell> cells;
  morpholcz::ContiguityGraph contiguity;

  Scene() {
    const std::vector<std::pair<std::pair<double, double>, std::pair<double, double>>> lines = {
        {{0, 0}, {0, 200}},       {{100, 0}, {100, 100}},   {{100, 100}, {100, 200}}, {{200, 0}, {200, 100}},
        {{200, 100}, {200, 200}}, {{0, 0}, {100, 0}},       {{100, 0}, {200, 0}},     {{0, 200}, {100, 200}},
        {{100, 200}, {200, 200}}, {{100, 100}, {140, 100}}, {{200, 100}, {197, 100}}, {{197, 100}, {194, 100}}};
    for (const auto& [a, b] : lines) {
      morpholcz::StreetSegment s;
      s.id = 1000 + static_cast<std::int64_t>(net.segments.size());
      s.line = {mg::Point(a.first, a.second), mg::Point(b.first, b.second)};
      s.length_m = bg::length(s.line);
      net.segments.push_back(s);
    }
    graph = morpholcz::build_graph(net);
    std::vector<mg::Polygon> fp = {
        rect(10, 10, 22, 24), rect(22, 12, 28, 20), rect(45, 10, 60, 22), rect(72, 12, 86, 25),
        ring_polygon({{10, 50}, {30, 50}, {30, 60}, {20, 60}, {20, 75}, {10, 75}}), rect(50, 55, 66, 70),
        ring_polygon({{15, 115}, {45, 115}, {45, 145}, {15, 145}}, {{25, 125}, {25, 135}, {35, 135}, {35, 125}}),
        rect(60, 115, 75, 128), rect(60, 150, 80, 165), rect(15, 160, 30, 185), rotated_rect(48, 178, 10, 6, 30),
        rect(82, 130, 92, 140), rect(110, 10, 125, 25), rect(140, 10, 160, 22), rect(175, 15, 190, 30),
        rect(112, 50, 130, 62), rect(150, 45, 165, 70), rect(110, 120, 122, 140), rect(140, 130, 160, 145),
        rect(195.5, 103, 198.5, 112)};
    for (std::size_t i = 0; i < fp.size(); ++i) buildings.push_back({static_cast<std::int64_t>(100 + i), fp[i]});
    const auto enc = morpholcz::build_enclosures(net, {}, {}, rect(0, 0, 200, 200));
    cells = morpholcz::tessellate(buildings, enc);
    morpholcz::link_elements(cells, buildings, net, graph);
    contiguity = morpholcz::build_contiguity(cells);
  }
};

bool is_profile(const std::string& name) {
  return name == "str_width" || name == "str_width_deviation" || name == "str_openness";
}

}  // namespace

Outcome metric_oracle(const Workspace&) {
  const auto t0 = std::chrono::steady_clock::now();
  Check check;
  Scene sc;
  check.expect(sc.buildings.size() == 20, "scene has 20 buildings");
  check.expect(sc.net.segments.size() == 12, "scene has 12 street segments");
  check.expect(sc.cells.size() == sc.buildings.size(), "one cell per building");
  const auto lib = morpholcz::primary_matrix(sc.buildings, sc.cells, sc.contiguity, sc.net, sc.graph);
  const auto ref = oracle::primary(sc.buildings, sc.cells, sc.net, sc.graph);
  check.expect(lib.cols() == morpholcz::kPrimaryMetrics && ref.cols() == morpholcz::kPrimaryMetrics, "107 columns");
  check.expect(lib.ids == ref.ids, "row ids");
  double worst = 0;
  std::string worst_col;
  std::vector<std::string> empty;
  for (std::size_t m = 0; m < lib.cols() && m < ref.cols(); ++m) {
    const double tol = is_profile(lib.columns[m]) ? 1e-3 : 1e-6;
    bool any = false;
    for (std::size_t r = 0; r < lib.rows(); ++r) {
      const double a = lib.at(r, m), b = ref.at(r, m);
      check.expect(close(a, b, tol), lib.columns[m] + " row " + std::to_string(r) + ": " + std::to_string(a) +
                                         " vs oracle " + std::to_string(b));
      if (!std::isnan(a) && !std::isnan(b)) {
        any = true;
        const double e = std::abs(a - b) / std::max(1.0, std::abs(b));
        if (e > worst) worst = e, worst_col = lib.columns[m];
      }
    }
    if (!any) empty.push_back(lib.columns[m]);
  }
  check.expect(empty.empty(), "no defined value anywhere for " + (empty.empty() ? "" : empty.front()));
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  check.expect(sec < 30, "runtime " + std::to_string(sec) + " s");
  std::ostringstream s;
  s << "107 metrics x " << lib.rows() << " cells, max rel err " << worst << " (" << worst_col << "), " << sec << " s";
  return check.done(s.str());
}

Outcome shape_identities(const Workspace&) {
  Check check;
  int squares = 0;
  for (double side : {2.0, 3.7, 10.0, 250.0})
    for (double deg : {0.0, 17.0, 45.0}) {
      const auto m = morpholcz::shape_metrics(rotated_rect(5, -3, side, side, deg));
      const std::string tag = "square " + std::to_string(side) + " at " + std::to_string(deg) + ": ";
      check.expect(std::abs(m.square_compactness - 1) <= 1e-9, tag + "square compactness");
      check.expect(std::abs(m.eri - 1) <= 1e-9, tag + "ERI");
      check.expect(std::abs(m.rectangularity - 1) <= 1e-9, tag + "rectangularity");
      check.expect(std::abs(m.elongation - 1) <= 1e-9, tag + "elongation");
      check.expect(std::abs(m.fractal_dimension - 1) <= 1e-9, tag + "fractal dimension");
      ++squares;
    }
  std::vector<std::pair<double, double>> pts;
  for (int k = 0; k < 256; ++k) pts.emplace_back(40 * std::cos(2 * M_PI * k / 256), 40 * std::sin(2 * M_PI * k / 256));
  const double cc = morpholcz::shape_metrics(ring_polygon(pts)).circular_compactness;
  check.expect(cc >= 0.999, "256-gon circular compactness " + std::to_string(cc));
  std::ostringstream s;
  s << squares << " squares at identity to 1e-9, 256-gon circular compactness " << cc;
  return check.done(s.str());
}

Outcome tessellation_conservation(const Workspace&) {
  Check check;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  std::size_t total_cells = 0;
  for (int trial = 0; trial < 50; ++trial) {
    // Star-shaped enclosure with 5 to 11 vertices.
    const int n = 5 + trial % 7;
    std::vector<double> ang;
    for (int k = 0; k < n; ++k) ang.push_back(2 * M_PI * (k + 0.15 + 0.7 * u(rng)) / n);
    std::vector<std::pair<double, double>> pts;
    for (double a : ang) {
      const double r = 60 + 60 * u(rng);
      pts.emplace_back(r * std::cos(a), r * std::sin(a));
    }
    const mg::Polygon region = ring_polygon(pts);
    mg::LineString boundary(region.outer().begin(), region.outer().end());
    std::vector<Building> bs;
    const int want = 1 + trial % 12;
    for (int attempt = 0; attempt < 400 && static_cast<int>(bs.size()) < want; ++attempt) {
      const double w = 4 + 12 * u(rng), h = 4 + 12 * u(rng);
      const double x = -110 + 220 * u(rng), y = -110 + 220 * u(rng);
      const auto fp = rotated_rect(x, y, w, h, 90 * u(rng));
      if (!bg::within(fp, region) || bg::distance(fp, boundary) < 2) continue;
      bool clash = false;
      for (const auto& b : bs) clash = clash || bg::distance(b.footprint, fp) < 1.0;
      if (!clash) bs.push_back({static_cast<std::int64_t>(500 + bs.size()), fp});
    }
    const double area = bg::area(region);
    const auto cells = morpholcz::tessellate(bs, {{trial, region}});
    double sum = 0;
    std::multiset<std::int64_t> seen;
    for (const auto& c : cells) {
      sum += bg::area(c.polygon);
      seen.insert(c.building_id);
    }
    std::set<std::int64_t> ids;
    for (const auto& b : bs) ids.insert(b.id);
    const double err = std::abs(sum - area) / area;
    worst = std::max(worst, err);
    total_cells += cells.size();
    const std::string tag = "enclosure " + std::to_string(trial) + ": ";
    check.expect(err <= 1e-3, tag + "area error " + std::to_string(err));
    check.expect(cells.size() == bs.size() && std::set<std::int64_t>(seen.begin(), seen.end()) == ids &&
                     seen.size() == ids.size(),
                 tag + "cells and buildings are not in bijection");
  }
  std::ostringstream s;
  s << "50 enclosures, " << total_cells << " cells, bijection in all, max area error " << worst;
  return check.done(s.str());
}

}  // namespace acceptance
