// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morpholcz/geometry.hpp"

namespace morpholcz {

/// North-up pixel grid. (x0, y0) is the top-left corner.
struct GridSpec {
  double x0 = 0.0, y0 = 0.0;
  double pixel = 10.0;
  std::size_t width = 0, height = 0;
  std::optional<int> epsg;

  geom::Point pixel_center(std::size_t col, std::size_t row) const {
    return {x0 + (static_cast<double>(col) + 0.5) * pixel, y0 - (static_cast<double>(row) + 0.5) * pixel};
  }
  geom::Box bounds() const {
    return {{x0, y0 - static_cast<double>(height) * pixel}, {x0 + static_cast<double>(width) * pixel, y0}};
  }
  bool same_geometry(const GridSpec& o) const {
    return x0 == o.x0 && y0 == o.y0 && pixel == o.pixel && width == o.width && height == o.height;
  }
};

/// Band-sequential raster; NaN marks nodata.
struct Raster {
  GridSpec grid;
  std::vector<std::string> names;
  std::vector<std::vector<double>> bands;  // each width * height, row-major

  std::size_t size() const { return grid.width * grid.height; }
  double at(std::size_t b, std::size_t col, std::size_t row) const { return bands[b][row * grid.width + col]; }
  void add_band(std::string name, std::vector<double> v);
};

enum class PixelType { float32, uint8 };

struct TiffMeta {
  nlohmann::json description;  // stored in ImageDescription; band names live here
};

/// Writes an uncompressed, pixel-interleaved GeoTIFF. float32 rasters carry
/// a NaN nodata tag; uint8 rasters use 0 as nodata.
void write_geotiff(const std::filesystem::path& path, const Raster& r, PixelType type, const nlohmann::json& meta = {});
/// Reads uncompressed strip TIFFs (8/16/32-bit integers, float32/64, chunky
/// or planar). Nodata values become NaN.
Raster read_geotiff(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

/// 8-bit RGB PNG, row-major, 3 bytes per pixel.
void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb);

}  // namespace morpholcz
