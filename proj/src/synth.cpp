// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "morpholcz/error.hpp"
#include "morpholcz/io_vector.hpp"

namespace morpholcz {

namespace bg = geom::bg;
namespace fs = std::filesystem;
using geom::Box;
using geom::Point;
using geom::Polygon;

namespace {

struct TemplateDefaults {
  double footprint, gap, pitch, occupancy, built_share, aspect;
};

TemplateDefaults defaults(Template t) {
  switch (t) {
    case Template::compact_lowrise:
      return {10.0, 3.0, 100.0, 1.0, 1.0, 1.0};
    case Template::open_lowrise:
      return {12.0, 18.0, 100.0, 0.85, 0.4, 1.2};
    case Template::large_lowrise:
      return {40.0, 16.0, 200.0, 1.0, 1.0, 1.5};
    case Template::sparse:
      return {12.0, 18.0, 100.0, 0.85, 0.4, 1.2};  // open-like clusters in a natural setting
  }
  return {};
}

constexpr double kSetback = 8.0;  // street centreline to the first lot edge
constexpr double kAlign = 100.0;

Polygon rect(double x0, double y0, double x1, double y1) {
  Polygon p;
  p.outer() = {{x0, y0}, {x0, y1}, {x1, y1}, {x1, y0}, {x0, y0}};
  bg::correct(p);
  return p;
}

bool aligned(double v) { return std::fabs(v / kAlign - std::round(v / kAlign)) < 1e-9; }

// Axis-aligned street lines, merged where collinear and split wherever
// another line meets them.
std::vector<geom::LineString> node_grid(const std::map<double, std::vector<std::pair<double, double>>>& horizontal,
                                        const std::map<double, std::vector<std::pair<double, double>>>& vertical) {
  auto merge = [](std::vector<std::pair<double, double>> iv) {
    std::sort(iv.begin(), iv.end());
    std::vector<std::pair<double, double>> out;
    for (const auto& [a, b] : iv) {
      if (!out.empty() && a <= out.back().second) out.back().second = std::max(out.back().second, b);
      else out.emplace_back(a, b);
    }
    return out;
  };
  std::map<double, std::vector<std::pair<double, double>>> H, V;
  for (const auto& [y, iv] : horizontal) H[y] = merge(iv);
  for (const auto& [x, iv] : vertical) V[x] = merge(iv);
  std::vector<geom::LineString> out;
  auto emit = [&](bool horiz, double fixed, double a, double b, const auto& cross) {
    std::set<double> cuts = {a, b};
    for (const auto& [pos, ivs] : cross) {
      if (pos < a || pos > b) continue;
      for (const auto& [c0, c1] : ivs)
        if (fixed >= c0 && fixed <= c1) cuts.insert(pos);
    }
    for (auto it = cuts.begin(); std::next(it) != cuts.end(); ++it) {
      const double u = *it, v = *std::next(it);
      out.push_back(horiz ? geom::LineString{{u, fixed}, {v, fixed}} : geom::LineString{{fixed, u}, {fixed, v}});
    }
  };
  for (const auto& [y, ivs] : H)
    for (const auto& [a, b] : ivs) emit(true, y, a, b, V);
  for (const auto& [x, ivs] : V)
    for (const auto& [a, b] : ivs) emit(false, x, a, b, H);
  return out;
}

}  // namespace

std::string to_string(Template t) {
  switch (t) {
    case Template::compact_lowrise:
      return "compact_lowrise";
    case Template::open_lowrise:
      return "open_lowrise";
    case Template::large_lowrise:
      return "large_lowrise";
    case Template::sparse:
      return "sparse";
  }
  return "";
}

Template template_from_string(const std::string& s) {
  for (auto t : {Template::compact_lowrise, Template::open_lowrise, Template::large_lowrise, Template::sparse})
    if (to_string(t) == s) return t;
  throw ConfigError("unknown district template: " + s);
}

int template_class(Template t) {
  switch (t) {
    case Template::compact_lowrise:
      return 3;
    case Template::open_lowrise:
      return 6;
    case Template::large_lowrise:
      return 8;
    case Template::sparse:
      return 9;
  }
  return 0;
}

std::vector<District> default_districts() {
  auto d = [](Template t, double x0, double y0, double x1, double y1) {
    District r;
    r.kind = t;
    r.extent = Box({x0, y0}, {x1, y1});
    return r;
  };
  return {d(Template::compact_lowrise, 0, 600, 600, 1200), d(Template::open_lowrise, 600, 400, 1200, 1200),
          d(Template::large_lowrise, 0, 0, 600, 600), d(Template::sparse, 600, 0, 1200, 400)};
}

SynthCity synth_city(const std::vector<District>& districts, std::uint64_t seed) {
  if (districts.empty()) throw ConfigError("synthetic city needs at least one district");
  for (std::size_t i = 0; i < districts.size(); ++i) {
    const auto& e = districts[i].extent;
    if (!aligned(e.min_corner().x()) || !aligned(e.min_corner().y()) || !aligned(e.max_corner().x()) ||
        !aligned(e.max_corner().y()) || !(e.max_corner().x() > e.min_corner().x()) ||
        !(e.max_corner().y() > e.min_corner().y()))
      throw ConfigError("district " + std::to_string(i) + " is not aligned to the 100 m grid");
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = districts[j].extent;
      const double w = std::min(e.max_corner().x(), o.max_corner().x()) - std::max(e.min_corner().x(), o.min_corner().x());
      const double h = std::min(e.max_corner().y(), o.max_corner().y()) - std::max(e.min_corner().y(), o.min_corner().y());
      if (w > 0 && h > 0) throw ConfigError("districts " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
    }
  }
  SynthCity city;
  Box env = districts.front().extent;
  for (const auto& d : districts) bg::expand(env, d.extent);
  city.study_area = rect(env.min_corner().x(), env.min_corner().y(), env.max_corner().x(), env.max_corner().y());

  std::map<double, std::vector<std::pair<double, double>>> H, V;
  std::int64_t next_building = 1, next_ref = 1;
  for (std::size_t k = 0; k < districts.size(); ++k) {
    const auto& d = districts[k];
    const auto def = defaults(d.kind);
    const double fp = d.footprint > 0 ? d.footprint : def.footprint;
    const double gap = d.gap > 0 ? d.gap : def.gap;
    const double pitch = d.pitch > 0 ? d.pitch : def.pitch;
    const double occ = d.occupancy > 0 ? d.occupancy : def.occupancy;
    const double built = d.built_share > 0 ? d.built_share : def.built_share;
    const double x0 = d.extent.min_corner().x(), y0 = d.extent.min_corner().y();
    const double x1 = d.extent.max_corner().x(), y1 = d.extent.max_corner().y();
    std::vector<double> xs, ys;
    for (double x = x0; x < x1 - 1e-9; x += pitch) xs.push_back(x);
    xs.push_back(x1);
    for (double y = y0; y < y1 - 1e-9; y += pitch) ys.push_back(y);
    ys.push_back(y1);
    for (double y : ys) H[y].emplace_back(x0, x1);
    for (double x : xs) V[x].emplace_back(y0, y1);

    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(ss);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double w_lot = fp * std::sqrt(def.aspect), h_lot = fp / std::sqrt(def.aspect);
    for (std::size_t bx = 0; bx + 1 < xs.size(); ++bx) {
      for (std::size_t by = 0; by + 1 < ys.size(); ++by) {
        const double ix0 = xs[bx] + kSetback, ix1 = xs[bx + 1] - kSetback;
        const double iy0 = ys[by] + kSetback, iy1 = ys[by + 1] - kSetback;
        const auto nx = static_cast<int>(std::floor((ix1 - ix0 + gap) / (w_lot + gap)));
        const auto ny = static_cast<int>(std::floor((iy1 - iy0 + gap) / (h_lot + gap)));
        const double ox = ix0 + 0.5 * ((ix1 - ix0) - (nx * (w_lot + gap) - gap));
        const double oy = iy0 + 0.5 * ((iy1 - iy0) - (ny * (h_lot + gap) - gap));
        const double block_occ = unit(rng) < built ? occ : 0.0;
        for (int i = 0; i < nx; ++i) {
          for (int j = 0; j < ny; ++j) {
            const double keep = unit(rng);
            const double sw = 0.85 + 0.15 * unit(rng), sh = 0.85 + 0.15 * unit(rng);
            const double jx = unit(rng), jy = unit(rng);
            if (keep >= block_occ) continue;
            const double w = w_lot * sw, h = h_lot * sh;
            const double cx = ox + i * (w_lot + gap) + w_lot / 2 + (jx - 0.5) * (w_lot - w);
            const double cy = oy + j * (h_lot + gap) + h_lot / 2 + (jy - 0.5) * (h_lot - h);
            city.buildings.push_back({next_building++, rect(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)});
          }
        }
      }
    }
    const double tile = d.reference_tile;
    for (double ty = y0; ty < y1 - 1e-9; ty += tile) {
      for (double tx = x0; tx < x1 - 1e-9; tx += tile) {
        ReferencePolygon r;
        r.id = next_ref++;
        r.polygon = rect(tx, ty, std::min(tx + tile, x1), std::min(ty + tile, y1));
        r.lcz = template_class(d.kind);
        r.weight_area = bg::area(r.polygon) / 10000.0;
        city.reference.push_back(std::move(r));
      }
    }
  }
  std::int64_t sid = 1;
  for (auto& l : node_grid(H, V)) {
    StreetSegment s;
    s.id = sid++;
    s.length_m = bg::length(l);
    s.line = std::move(l);
    city.streets.segments.push_back(std::move(s));
  }

  GridSpec g;
  g.x0 = env.min_corner().x();
  g.y0 = env.max_corner().y();
  g.width = static_cast<std::size_t>(std::lround((env.max_corner().x() - g.x0) / g.pixel));
  g.height = static_cast<std::size_t>(std::lround((g.y0 - env.min_corner().y()) / g.pixel));
  g.epsg = city.epsg;
  city.imagery.grid = g;
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> noise(0.0, 0.04);
  std::vector<std::vector<double>> bands(10, std::vector<double>(city.imagery.size()));
  for (std::size_t row = 0; row < g.height; ++row) {
    for (std::size_t col = 0; col < g.width; ++col) {
      const Point c = g.pixel_center(col, row);
      int t = -1;
      for (std::size_t k = 0; k < districts.size(); ++k)
        if (bg::covered_by(c, districts[k].extent)) t = static_cast<int>(districts[k].kind);
      for (std::size_t b = 0; b < 10; ++b) {
        const double base = 0.05 + 0.02 * static_cast<double>(b) + (t < 0 ? 0.0 : 0.03 * (t + 1));
        bands[b][row * g.width + col] = base + noise(rng);
      }
    }
  }
  static const char* kNames[] = {"B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B11", "B12"};
  for (std::size_t b = 0; b < 10; ++b) city.imagery.add_band(kNames[b], std::move(bands[b]));
  return city;
}

fs::path write_synth_site(const SynthCity& city, const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  io::Crs crs;
  crs.epsg = city.epsg;
  crs.name = "EPSG:" + std::to_string(city.epsg);
  auto layer = [&](const fs::path& name, auto&& fill) {
    io::FeatureCollection fc;
    fc.crs = crs;
    fill(fc);
    io::write_layer(dir / name, fc, name.stem().string());
  };
  layer("buildings.geojson", [&](io::FeatureCollection& fc) {
    for (const auto& b : city.buildings) fc.features.push_back({b.id, b.footprint, nlohmann::json::object()});
  });
  layer("streets.geojson", [&](io::FeatureCollection& fc) {
    for (const auto& s : city.streets.segments) fc.features.push_back({s.id, s.line, {{"class", "residential"}}});
  });
  layer("study_area.geojson",
        [&](io::FeatureCollection& fc) { fc.features.push_back({1, city.study_area, nlohmann::json::object()}); });
  layer("reference.geojson", [&](io::FeatureCollection& fc) {
    for (const auto& r : city.reference) fc.features.push_back({r.id, r.polygon, {{"lcz", lcz_name(r.lcz)}}});
  });
  write_geotiff(dir / "imagery.tif", city.imagery, PixelType::float32, {{"producer", "morpholcz synth"}, {"seed", seed}});

  SiteConfig cfg;
  cfg.name = "synthetic";
  cfg.seed = seed;
  cfg.paths.buildings = "buildings.geojson";
  cfg.paths.streets = "streets.geojson";
  cfg.paths.study_area = "study_area.geojson";
  cfg.paths.reference = "reference.geojson";
  cfg.paths.imagery = "imagery.tif";
  cfg.paths.output = "out";
  // desk-scale tuning: a single core must finish the whole site in minutes
  cfg.forest.n_trees = 50;
  cfg.forest.depth_grid = {8, 16, -1};
  cfg.forest.feature_grid = {17, 32};
  cfg.s4 = false;
  const fs::path ini = dir / "site.ini";
  cfg.save(ini);
  return ini;
}

}  // namespace morpholcz
