// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "morpholcz/error.hpp"
#include "morpholcz/fusion.hpp"

namespace mg = morpholcz::geom;
namespace fs = std::filesystem;
using fixtures::rect;
using morpholcz::EtcCell;
using morpholcz::GridSpec;
using morpholcz::Raster;

namespace {

GridSpec grid(std::size_t w, std::size_t h, double x0 = 0, double y0 = 0) {
  GridSpec g;
  g.x0 = x0;
  g.y0 = y0 == 0 ? static_cast<double>(h) * 10 : y0;
  g.width = w;
  g.height = h;
  return g;
}

EtcCell cell(std::int64_t id, const mg::Polygon& p) {
  EtcCell c;
  c.id = id;
  c.building_id = id;
  c.polygon = mg::to_multi(p);
  return c;
}

morpholcz::Table values(const std::vector<EtcCell>& cells, std::size_t ncols, double base) {
  std::vector<std::int64_t> ids;
  for (const auto& c : cells) ids.push_back(c.id);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < ncols; ++k) names.push_back("m" + std::to_string(k));
  morpholcz::Table t(ids, names);
  for (std::size_t r = 0; r < ids.size(); ++r)
    for (std::size_t k = 0; k < ncols; ++k) t.at(r, k) = base + static_cast<double>(ids[r] * 10 + k);
  return t;
}

Raster random_raster(std::size_t w, std::size_t h, std::size_t nb, std::uint64_t seed, double nan_share) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-50, 50), p(0, 1);
  Raster r;
  r.grid = grid(w, h);
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<double> v(w * h);
    for (auto& x : v) x = p(rng) < nan_share ? morpholcz::kMissing : u(rng);
    r.add_band("b" + std::to_string(b), v);
  }
  return r;
}

}  // namespace

TEST(GeoTiff, RoundTripFloatAndByte) {
  auto dir = fixtures::temp_dir("tiff");
  Raster r;
  r.grid = grid(7, 5, 500000, 4100000);
  r.grid.epsg = 32633;
  std::vector<double> a(35), b(35);
  for (std::size_t i = 0; i < 35; ++i) {
    a[i] = i % 6 == 0 ? morpholcz::kMissing : static_cast<double>(static_cast<float>(i * 0.37 - 3));
    b[i] = static_cast<double>(i);
  }
  r.add_band("alpha", a);
  r.add_band("beta", b);
  morpholcz::write_geotiff(dir / "f.tif", r, morpholcz::PixelType::float32, {{"seed", 7}});
  nlohmann::json meta;
  auto back = morpholcz::read_geotiff(dir / "f.tif", &meta);
  EXPECT_TRUE(back.grid.same_geometry(r.grid));
  EXPECT_EQ(back.grid.epsg, 32633);
  EXPECT_EQ(back.names, r.names);
  EXPECT_EQ(meta["seed"], 7);
  for (std::size_t i = 0; i < 35; ++i) {
    if (std::isnan(a[i])) {
      EXPECT_TRUE(std::isnan(back.bands[0][i]));
    } else {
      EXPECT_EQ(back.bands[0][i], a[i]);
    }
    EXPECT_EQ(back.bands[1][i], b[i]);
  }
  Raster cls;
  cls.grid = grid(4, 4);
  std::vector<double> c(16);
  for (std::size_t i = 0; i < 16; ++i) c[i] = i % 5 == 0 ? morpholcz::kMissing : static_cast<double>(i % 17 + 1);
  cls.add_band("lcz", c);
  morpholcz::write_geotiff(dir / "c.tif", cls, morpholcz::PixelType::uint8);
  auto cb = morpholcz::read_geotiff(dir / "c.tif");
  for (std::size_t i = 0; i < 16; ++i) {
    if (std::isnan(c[i])) {
      EXPECT_TRUE(std::isnan(cb.bands[0][i]));
    } else {
      EXPECT_EQ(cb.bands[0][i], c[i]);
    }
  }
  EXPECT_THROW(morpholcz::read_geotiff(dir / "missing.tif"), morpholcz::DataError);
}

TEST(Png, WritesSignature) {
  auto dir = fixtures::temp_dir("png");
  morpholcz::write_png(dir / "x.png", 2, 2, std::vector<std::uint8_t>(12, 200));
  std::ifstream f(dir / "x.png", std::ios::binary);
  char sig[8];
  f.read(sig, 8);
  EXPECT_EQ(std::string(sig + 1, 3), "PNG");
}

TEST(Rasterize, SquareCellCoversBlock) {
  auto g = grid(10, 10);
  std::vector<EtcCell> cells = {cell(1, rect(20, 30, 70, 80))};
  auto t = values(cells, 1, 0);
  t.at(0, 0) = 7;
  auto r = morpholcz::rasterize_attributes(cells, std::nullopt, t, {0}, g);
  int sevens = 0, nodata = 0;
  for (double v : r.bands[0]) {
    if (v == 7) ++sevens;
    if (std::isnan(v)) ++nodata;
  }
  EXPECT_EQ(sevens, 25);
  EXPECT_EQ(nodata, 75);
}

TEST(Rasterize, SharedEdgeGoesToLowerId) {
  auto g = grid(4, 1);
  // Edge at x = 15 runs through the centre of pixel 1.
  std::vector<EtcCell> cells = {cell(9, rect(15, 0, 40, 10)), cell(4, rect(0, 0, 15, 10))};
  auto idx = morpholcz::cell_index_raster(cells, g);
  EXPECT_EQ(idx, (std::vector<std::int64_t>{1, 1, 0, 0}));
}

TEST(Rasterize, RandomSceneMatchesPointInPolygon) {
  std::mt19937 rng(30);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<morpholcz::Building> bs;
  while (bs.size() < 30) {
    const double x = 10 + 270 * u(rng), y = 10 + 170 * u(rng);
    auto fp = rect(x, y, x + 6, y + 5);
    bool ok = true;
    for (const auto& b : bs) ok = ok && mg::bg::distance(b.footprint, fp) > 2;
    if (ok) bs.push_back({static_cast<std::int64_t>(bs.size()), fp});
  }
  auto cells = morpholcz::tessellate(bs, {{0, rect(0, 0, 300, 200)}});
  ASSERT_EQ(cells.size(), 30u);
  auto g = grid(32, 22, -10, 210);
  auto idx = morpholcz::cell_index_raster(cells, g);
  for (std::size_t row = 0; row < g.height; ++row)
    for (std::size_t col = 0; col < g.width; ++col) {
      const auto p = g.pixel_center(col, row);
      std::int64_t best = -1;
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (mg::bg::covered_by(p, cells[i].polygon) && (best < 0 || cells[i].id < cells[std::size_t(best)].id))
          best = static_cast<std::int64_t>(i);
      EXPECT_EQ(idx[row * g.width + col], best) << col << "," << row;
    }
}

TEST(Rasterize, CrsMismatchFails) {
  auto g = grid(2, 2);
  g.epsg = 32633;
  std::vector<EtcCell> cells = {cell(1, rect(0, 0, 20, 20))};
  EXPECT_THROW(morpholcz::rasterize_attributes(cells, 32634, values(cells, 1, 0), {0}, g), morpholcz::DataError);
  EXPECT_NO_THROW(morpholcz::rasterize_attributes(cells, 32633, values(cells, 1, 0), {0}, g));
}

TEST(Zonal, ConstantAndSequenceBlocks) {
  Raster r;
  r.grid = grid(20, 10);
  std::vector<double> c(200, 4.25), seq(200);
  for (std::size_t row = 0; row < 10; ++row)
    for (std::size_t col = 0; col < 20; ++col) seq[row * 20 + col] = col < 10 ? double(row * 10 + col + 1) : -1;
  r.add_band("c", c);
  r.add_band("s", seq);
  auto t = morpholcz::zonal_s3(r, morpholcz::make_grid100(r.grid));
  ASSERT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"c_mean", "c_max", "c_min", "s_mean", "s_max", "s_min"}));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(t.at(0, k), 4.25);
  EXPECT_DOUBLE_EQ(t.at(0, 3), 50.5);
  EXPECT_EQ(t.at(0, 4), 100);
  EXPECT_EQ(t.at(0, 5), 1);
}

TEST(Zonal, NinetyColumnsAndLoopOracle) {
  auto r = random_raster(40, 30, 30, 1, 0.1);
  // One 100 m cell with a fully nodata band.
  for (std::size_t row = 0; row < 10; ++row)
    for (std::size_t col = 0; col < 10; ++col) r.bands[12][row * 40 + col] = morpholcz::kMissing;
  auto g = morpholcz::make_grid100(r.grid);
  auto t = morpholcz::zonal_s3(r, g);
  ASSERT_EQ(t.cols(), 90u);
  ASSERT_EQ(t.rows(), 12u);
  EXPECT_TRUE(morpholcz::missing(t.at(0, 36)));
  for (std::size_t id = 0; id < g.size(); ++id)
    for (std::size_t b = 0; b < 30; ++b) {
      double s = 0, mx = -1e300, mn = 1e300;
      int n = 0;
      for (std::size_t row = 0; row < 30; ++row)
        for (std::size_t col = 0; col < 40; ++col) {
          if (row / 10 * 4 + col / 10 != id) continue;
          const double v = r.bands[b][row * 40 + col];
          if (std::isnan(v)) continue;
          s += v, ++n, mx = std::max(mx, v), mn = std::min(mn, v);
        }
      if (n == 0) continue;
      EXPECT_NEAR(t.at(id, 3 * b), s / n, 1e-9 * std::max(1.0, std::abs(s / n)));
      EXPECT_EQ(t.at(id, 3 * b + 1), mx);
      EXPECT_EQ(t.at(id, 3 * b + 2), mn);
    }
}

TEST(Zonal, RasterizedConstantIsExact) {
  auto g = grid(20, 20);
  std::vector<EtcCell> cells = {cell(1, rect(0, 0, 200, 200))};
  auto t = values(cells, 1, 0);
  t.at(0, 0) = 0.1 + 0.2;
  auto r = morpholcz::rasterize_attributes(cells, std::nullopt, t, {0}, g);
  auto z = morpholcz::zonal_s3(r, morpholcz::make_grid100(g));
  for (std::size_t id = 0; id < 4; ++id) EXPECT_EQ(z.at(id, 0), 0.1 + 0.2);
}

TEST(Patches, SixFortyMetreRaster) {
  auto pi = morpholcz::make_patches(grid(64, 64));
  ASSERT_EQ(pi.patches.size(), 16u);
  EXPECT_EQ(pi.size_px, 32u);
  EXPECT_EQ(pi.patches[0].id, 7);
  EXPECT_EQ(pi.patches[3].id, 10);
  EXPECT_EQ(pi.patches[15].id, 28);
  EXPECT_EQ(pi.patches[5].col0, 10u);
  EXPECT_EQ(pi.patches[5].row0, 10u);
}

TEST(Patches, CountFormulaOnRandomExtents) {
  std::mt19937 rng(20);
  std::uniform_int_distribution<std::size_t> u(20, 200);
  for (int t = 0; t < 20; ++t) {
    const std::size_t w = u(rng), h = u(rng);
    auto pi = morpholcz::make_patches(grid(w, h));
    auto axis = [](std::size_t px) { return px < 32 ? 0 : (px * 10 - 320) / 100 + 1; };
    EXPECT_EQ(pi.patches.size(), axis(w) * axis(h)) << w << "x" << h;
    EXPECT_EQ(pi.dropped, 0u);
    for (const auto& p : pi.patches) {
      EXPECT_LE(p.col0 + 32, w);
      EXPECT_LE(p.row0 + 32, h);
    }
  }
}

TEST(Patches, LabelsFromCentralPixel) {
  auto g = grid(64, 64);
  // Central pixel of the first patch: column 16, row 16 -> (165, 475).
  std::vector<morpholcz::ReferencePolygon> ref = {{5, rect(150, 460, 180, 490), 2, 0, 0},
                                                  {6, rect(400, 0, 640, 200), 11, 0, 0}};
  auto pi = morpholcz::make_patches(g, {}, &ref);
  EXPECT_EQ(pi.patches[0].label, 2);
  EXPECT_FALSE(pi.patches[1].label.has_value());
  int natural = 0;
  for (const auto& p : pi.patches) natural += p.label == 11;
  // Central pixels sit at x = 165 + 100 i, y = 475 - 100 j; only (465, 175)
  // lies in the second polygon.
  EXPECT_EQ(natural, 1);
  auto relabeled = ref;
  relabeled[0].id = 900;
  relabeled[1].id = 1;
  auto pj = morpholcz::make_patches(g, {}, &relabeled);
  for (std::size_t k = 0; k < pi.patches.size(); ++k) EXPECT_EQ(pi.patches[k].label, pj.patches[k].label);
}

TEST(PatchStats, HandArithmeticAndColumns) {
  Raster r;
  r.grid = grid(64, 64);
  std::vector<double> c(64 * 64, 3.5), few(64 * 64, morpholcz::kMissing);
  few[0] = 1, few[1] = 2, few[64] = 3, few[65] = 4;
  r.add_band("c", c);
  r.add_band("few", few);
  auto pi = morpholcz::make_patches(r.grid);
  auto t = morpholcz::patch_stats(r, pi);
  ASSERT_EQ(t.cols(), 10u);
  EXPECT_EQ(t.columns[3], "c_std");
  EXPECT_EQ(t.at(0, 0), 3.5);
  EXPECT_EQ(t.at(0, 1), 3.5);
  EXPECT_EQ(t.at(0, 2), 3.5);
  EXPECT_EQ(t.at(0, 3), 0.0);
  EXPECT_EQ(t.at(0, 4), 3.5);
  EXPECT_DOUBLE_EQ(t.at(0, 5), 2.5);
  EXPECT_NEAR(t.at(0, 8), 1.1180339887, 1e-9);
  EXPECT_DOUBLE_EQ(t.at(0, 9), 2.5);
  EXPECT_TRUE(morpholcz::missing(t.at(1, 5)));
}

TEST(PatchStats, HundredColumnsAndLoopOracle) {
  auto r = random_raster(64, 54, 20, 3, 0.2);
  auto pi = morpholcz::make_patches(r.grid);
  auto t = morpholcz::patch_stats(r, pi);
  ASSERT_EQ(t.cols(), 100u);
  for (std::size_t k = 0; k < pi.patches.size(); ++k)
    for (std::size_t b = 0; b < 20; ++b) {
      std::vector<double> v;
      for (std::size_t row = pi.patches[k].row0; row < pi.patches[k].row0 + 32; ++row)
        for (std::size_t col = pi.patches[k].col0; col < pi.patches[k].col0 + 32; ++col)
          if (!std::isnan(r.bands[b][row * 64 + col])) v.push_back(r.bands[b][row * 64 + col]);
      double s = 0;
      for (double x : v) s += x;
      const double mean = s / v.size();
      double ss = 0;
      for (double x : v) ss += (x - mean) * (x - mean);
      std::sort(v.begin(), v.end());
      const double med = v.size() % 2 ? v[v.size() / 2] : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2;
      auto rel = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
      EXPECT_TRUE(rel(t.at(k, 5 * b), mean));
      EXPECT_EQ(t.at(k, 5 * b + 1), v.front());
      EXPECT_EQ(t.at(k, 5 * b + 2), v.back());
      EXPECT_TRUE(rel(t.at(k, 5 * b + 3), std::sqrt(ss / v.size())));
      EXPECT_EQ(t.at(k, 5 * b + 4), med);
    }
}

TEST(Embeddings, FixtureMatchesPatchIndex) {
  auto e = morpholcz::read_embeddings(fs::path(MORPHOLCZ_TEST_DATA) / "embeddings_fold0.csv");
  EXPECT_EQ(e.dim, 8u);
  EXPECT_EQ(e.producer, "fixture/sine");
  ASSERT_EQ(e.rows(), 16u);
  auto pi = morpholcz::make_patches(grid(64, 64));
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(e.patch_ids[k], pi.patches[k].id);
  EXPECT_FALSE(e.labels[0].has_value());
  EXPECT_EQ(e.labels[1], 2);
  EXPECT_EQ(e.values[0], std::sin(0.7 * 7));
}

TEST(Embeddings, RoundTripAndTamperDetection) {
  auto dir = fixtures::temp_dir("emb");
  auto e = morpholcz::read_embeddings(fs::path(MORPHOLCZ_TEST_DATA) / "embeddings_fold0.csv");
  for (const char* name : {"x.csv", "x.jsonl"}) {
    morpholcz::write_embeddings(dir / name, e);
    auto b = morpholcz::read_embeddings(dir / name);
    EXPECT_EQ(b.patch_ids, e.patch_ids);
    EXPECT_EQ(b.labels, e.labels);
    ASSERT_EQ(b.values.size(), e.values.size());
    for (std::size_t i = 0; i < e.values.size(); ++i) EXPECT_EQ(b.values[i], e.values[i]);
  }
  {
    std::ofstream f(dir / "x.csv", std::ios::app);
    f << "99,0,,1,2,3,4,5,6,7,8\n";
  }
  EXPECT_THROW(morpholcz::read_embeddings(dir / "x.csv"), morpholcz::DataError);
  fs::remove(dir / "x.jsonl.json");
  EXPECT_THROW(morpholcz::read_embeddings(dir / "x.jsonl"), morpholcz::DataError);
}

TEST(AssembleS4, ConcatenatesAndNamesMissing) {
  auto e = morpholcz::read_embeddings(fs::path(MORPHOLCZ_TEST_DATA) / "embeddings_fold0.csv");
  auto r = random_raster(64, 64, 20, 4, 0.0);
  auto pi = morpholcz::make_patches(r.grid);
  auto stats = morpholcz::patch_stats(r, pi);
  auto t = morpholcz::assemble_s4(e, stats);
  ASSERT_EQ(t.cols(), 108u);
  EXPECT_EQ(t.columns[0], "e0");
  EXPECT_EQ(t.columns[8], "b0_mean");
  EXPECT_EQ(t.at(3, 2), e.values[3 * 8 + 2]);
  EXPECT_EQ(t.at(3, 8), stats.at(3, 0));
  auto dir = fixtures::temp_dir("s4");
  morpholcz::write_csv(dir / "s4.csv", t);
  auto back = morpholcz::read_csv(dir / "s4.csv");
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.columns, t.columns);
  for (std::size_t i = 0; i < t.values.size(); ++i) EXPECT_EQ(back.values[i], t.values[i]);

  auto short_e = e;
  short_e.patch_ids.erase(short_e.patch_ids.begin() + 5);
  short_e.folds.erase(short_e.folds.begin() + 5);
  short_e.labels.erase(short_e.labels.begin() + 5);
  short_e.values.erase(short_e.values.begin() + 40, short_e.values.begin() + 48);
  try {
    morpholcz::assemble_s4(short_e, stats);
    FAIL() << "expected a key mismatch";
  } catch (const morpholcz::DataError& err) {
    EXPECT_NE(std::string(err.what()).find(std::to_string(e.patch_ids[5])), std::string::npos);
  }
}
