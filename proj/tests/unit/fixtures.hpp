// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>

#include "morpholcz/geometry.hpp"

namespace fixtures {

using morpholcz::geom::LineString;
using morpholcz::geom::Point;
using morpholcz::geom::Polygon;

inline Polygon poly(std::initializer_list<std::pair<double, double>> pts) {
  Polygon p;
  for (auto [x, y] : pts) p.outer().emplace_back(x, y);
  morpholcz::geom::bg::correct(p);
  return p;
}

inline Polygon rect(double x0, double y0, double x1, double y1) {
  return poly({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}});
}

inline Polygon regular_ngon(int n, double r, double cx = 0.0, double cy = 0.0) {
  Polygon p;
  for (int i = 0; i <= n; ++i) {
    const double t = 2.0 * M_PI * (i % n) / n;
    p.outer().emplace_back(cx + r * std::cos(t), cy + r * std::sin(t));
  }
  morpholcz::geom::bg::correct(p);
  return p;
}

inline LineString line(std::initializer_list<std::pair<double, double>> pts) {
  LineString l;
  for (auto [x, y] : pts) l.emplace_back(x, y);
  return l;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("morpholcz_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace fixtures
