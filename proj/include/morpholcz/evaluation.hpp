// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morpholcz/fusion.hpp"
#include "morpholcz/ingest.hpp"
#include "morpholcz/lcz.hpp"
#include "morpholcz/tessellation.hpp"

namespace morpholcz {

/// Splits the polygon of every class represented exactly once into two parts
/// of equal area, cut perpendicular to the long side of its minimum rotated
/// rectangle (short side if that cut is degenerate). The first part keeps
/// the id; the second takes the next free id. Throws DataError if both cuts
/// fail.
std::vector<ReferencePolygon> split_singletons(const std::vector<ReferencePolygon>& refs);

/// Area-bisecting cut of one polygon along direction `deg` (degrees from the
/// x axis); nullopt when either side is empty or not a single polygon.
std::optional<std::pair<geom::Polygon, geom::Polygon>> bisect_polygon(const geom::Polygon& p, double deg);

enum class Stratification { etc_count, area };
std::string to_string(Stratification s);

struct FoldAssignment {
  std::map<std::int64_t, int> fold;  // reference polygon id -> fold
  Stratification kind = Stratification::etc_count;
  int k = 5;
  nlohmann::json to_json() const;
};

/// Per class: seed-shuffled order, stable sort by descending weight, each
/// polygon to the lightest fold (lowest index on ties). Throws DataError if
/// a class has fewer than two polygons.
FoldAssignment stratified_folds(const std::vector<ReferencePolygon>& refs, Stratification kind, int k,
                                std::uint64_t seed);

/// Greedy LPT on plain weights, exposed for testing. Returns the fold per item.
std::vector<int> lpt_assign(const std::vector<double>& weights, int k, std::uint64_t seed);

/// Cell labels from the reference polygon containing the parent building's
/// centroid, or with `by_overlap` from the largest intersection with the cell.
Labeling label_etcs(const std::vector<EtcCell>& cells, const std::vector<Building>& buildings,
                    const std::vector<ReferencePolygon>& refs, bool by_overlap = false);

/// Fills weight_etc from a labeling.
void count_etcs(std::vector<ReferencePolygon>& refs, const Labeling& labels);

struct Scores {
  std::vector<int> classes;                  // ascending union of truth and prediction
  std::vector<std::vector<std::int64_t>> confusion;  // [true][pred]
  std::map<int, double> f1_class;
  std::map<int, std::int64_t> support;
  double oa = 0.0, f1 = 0.0, f1u = 0.0, f1n = 0.0;  // f1u / f1n NaN without support
  std::size_t n = 0;
  nlohmann::json to_json() const;
};

/// Throws DataError on empty or unequal inputs.
Scores scores(const std::vector<int>& truth, const std::vector<int>& pred);

struct Spread {
  double best = 0.0, worst = 0.0;
};

struct EvaluationReport {
  std::vector<Scores> folds;
  double oa = 0.0, f1 = 0.0, f1u = 0.0, f1n = 0.0;
  std::map<std::string, Spread> spread;  // per metric, over folds
  std::vector<int> classes;
  std::vector<std::vector<std::int64_t>> confusion;  // summed over folds
  std::map<int, double> f1_class;  // mean over folds with support
  nlohmann::json to_json() const;
  void write_confusion_csv(const std::filesystem::path& path) const;
};

EvaluationReport aggregate_report(const std::vector<Scores>& folds);

/// Majority class by summed intersection area per 100 m cell; 0 where no
/// labeled cell intersects. Ties go to the lower class.
std::vector<int> s1_to_grid(const std::vector<EtcCell>& cells, const std::vector<std::optional<int>>& labels,
                            const Grid100& grid);

struct MapFiles {
  std::filesystem::path data, png, legend;
};

/// Grid map: uint8 GeoTIFF (0 = nodata), PNG in the LCZ palette and a JSON
/// legend of the classes present.
MapFiles emit_grid_map(const std::vector<int>& labels, const Grid100& grid, const std::filesystem::path& stem,
                       const nlohmann::json& meta = {});
/// Cell map: GeoJSON with an `lcz` property, PNG rendered on `render` and a
/// legend.
MapFiles emit_cell_map(const std::vector<EtcCell>& cells, const std::vector<std::optional<int>>& labels,
                       const io::Crs& crs, const GridSpec& render, const std::filesystem::path& stem,
                       const nlohmann::json& meta = {});

nlohmann::json legend_json(const std::vector<int>& classes_present);

}  // namespace morpholcz
