// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "morpholcz/lcz.hpp"
#include "morpholcz/raster.hpp"
#include "morpholcz/table.hpp"
#include "morpholcz/tessellation.hpp"

namespace morpholcz {

/// 100 m cells aligned with the pixel grid origin; id = row * ncols + col,
/// rows counted from the top.
struct Grid100 {
  GridSpec pixels;
  std::size_t block = 10;  // pixels per cell side
  std::size_t ncols = 0, nrows = 0;

  std::size_t size() const { return ncols * nrows; }
  geom::Box cell_box(std::size_t id) const;
  geom::Point center(std::size_t id) const;
  /// Cell containing a point, if any.
  std::optional<std::size_t> cell_of(const geom::Point& p) const;
};

Grid100 make_grid100(const GridSpec& pixels, double cell_m = 100.0);

/// Per-pixel index into `cells` of the cell containing the pixel centre,
/// -1 where there is none. Centres on shared edges go to the lower cell id.
std::vector<std::int64_t> cell_index_raster(const std::vector<EtcCell>& cells, const GridSpec& grid);

/// One band per selected context column. Throws DataError on a CRS mismatch
/// (when both sides declare one) or a cell missing from the table.
Raster rasterize_attributes(const std::vector<EtcCell>& cells, std::optional<int> cells_epsg, const Table& context,
                            const std::vector<std::size_t>& subset, const GridSpec& grid);

/// Mean, max and min over non-nodata pixels per 100 m cell and band,
/// band-major (`<band>_mean`, `_max`, `_min`).
Table zonal_s3(const Raster& stack, const Grid100& g);

struct PatchSpec {
  double size_m = 320.0;
  double step_m = 100.0;
};

struct Patch {
  std::int64_t id = 0;  // 100 m cell holding the central pixel centre
  std::size_t col0 = 0, row0 = 0;
  std::optional<int> label;
  std::optional<std::size_t> reference;  // index of the labelling polygon
};

struct PatchIndex {
  std::vector<Patch> patches;
  std::size_t size_px = 32;
  std::size_t dropped = 0;
};

/// Windows per axis: floor((extent - size) / step) + 1, or 0 if the extent
/// is smaller than a patch.
std::size_t patches_per_axis(double extent_m, const PatchSpec& spec);

PatchIndex make_patches(const GridSpec& grid, const PatchSpec& spec = {},
                        const std::vector<ReferencePolygon>* reference = nullptr);

/// Mean, min, max, population std and median over non-nodata pixels per
/// patch and band (`<band>_mean`, `_min`, `_max`, `_std`, `_median`).
Table patch_stats(const Raster& morpho, const PatchIndex& patches);

/// Label and reference polygon of each 100 m cell by its centre.
Labeling label_grid100(const Grid100& g, const std::vector<ReferencePolygon>& reference);

// ---- embedding interchange ----

struct EmbeddingTable {
  std::size_t dim = 0;
  int fold = 0;
  std::string producer;
  std::vector<std::int64_t> patch_ids;
  std::vector<int> folds;
  std::vector<std::optional<int>> labels;
  std::vector<double> values;  // row-major, rows x dim

  std::size_t rows() const { return patch_ids.size(); }
};

/// Sidecar path for an embedding file: `<file>.json`.
std::filesystem::path embedding_sidecar(const std::filesystem::path& data);
/// Writes CSV (or JSON lines for a `.jsonl` extension) plus the sidecar.
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& t);
/// Reads and validates dimension and checksum against the sidecar.
EmbeddingTable read_embeddings(const std::filesystem::path& path);

/// Embedding columns (`e0`..) followed by the statistics columns; rows follow
/// `stats`. Key sets must match exactly.
Table assemble_s4(const EmbeddingTable& emb, const Table& stats);

}  // namespace morpholcz
