// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morpholcz/config.hpp"
#include "morpholcz/evaluation.hpp"
#include "morpholcz/forest.hpp"
#include "morpholcz/io_vector.hpp"
#include "morpholcz/table.hpp"

namespace morpholcz {

/// Stamped into every artifact a stage writes.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json to_json() const { return {{"config_hash", config_hash}, {"seed", seed}}; }
  void stamp(Table& t) const;
};

// ---------- layer round trips ----------

void write_buildings(const std::filesystem::path& path, const std::vector<Building>& b, const io::Crs& crs,
                     const Provenance& pv);
std::vector<Building> read_buildings(const std::filesystem::path& path);
void write_network(const std::filesystem::path& path, const StreetNetwork& n, const io::Crs& crs, const Provenance& pv);
StreetNetwork read_network(const std::filesystem::path& path);
void write_cells(const std::filesystem::path& path, const std::vector<EtcCell>& cells, const io::Crs& crs,
                 const Provenance& pv);
std::vector<EtcCell> read_cells(const std::filesystem::path& path, io::Crs* crs = nullptr);
std::vector<ReferencePolygon> read_reference(const std::filesystem::path& path, const std::string& field = "lcz");

// ---------- stages ----------
// Each stage reads files and writes files, so the CLI can run any of them
// alone and the pipeline can cache them.

IngestReport ingest_stage(const SitePaths& in, const IngestConfig& cfg, const std::filesystem::path& out,
                          const Provenance& pv);
void tessellate_stage(const std::filesystem::path& ingest_dir, const TessellationConfig& cfg,
                      const std::filesystem::path& out, const Provenance& pv);
void metrics_stage(const std::filesystem::path& cells, const std::filesystem::path& buildings,
                   const std::filesystem::path& network, const MorphoConfig& cfg, const std::filesystem::path& out,
                   const Provenance& pv);
void context_stage(const std::filesystem::path& primary, const std::filesystem::path& cells, const ContextConfig& cfg,
                   const std::filesystem::path& out_file, const Provenance& pv);

struct FoldsInputs {
  std::filesystem::path reference, cells, buildings;
  std::filesystem::path imagery;  // optional: also labels the 100 m grid
  std::string class_field = "lcz";
  bool label_by_overlap = false;
  int k = 5;
  double cell_m = 100.0;
};
/// Writes reference.geojson (split, weighted), folds.json (both
/// stratifications), labels.csv (cells) and grid_labels.csv (100 m cells).
void folds_stage(const FoldsInputs& in, std::uint64_t seed, const std::filesystem::path& out, const Provenance& pv);

/// Folds per reference polygon id for one stratification, from folds.json.
std::map<std::int64_t, int> read_folds(const std::filesystem::path& folds_json, Stratification kind, int* k = nullptr);

/// Labeled rows of `features`: `labels` holds `lcz` and `reference`
/// columns keyed by the same ids; the fold comes from the reference id.
Dataset make_dataset(const Table& features, const Table& labels, const std::map<std::int64_t, int>& folds);

/// Trains every configured weighting with per-fold tuning, keeps the one with
/// the larger F1 + F1U and writes models, tuning reports, predictions,
/// importances of the best fold model and its top-k feature names.
/// `per_fold` holds one dataset shared by all folds or one per fold.
void train_scheme(const std::vector<Dataset>& per_fold, int k, const ForestConfig& cfg, std::uint64_t seed,
                  const std::filesystem::path& out, const Provenance& pv);

void train_s1_stage(const std::filesystem::path& features, const std::filesystem::path& labels,
                    const std::filesystem::path& folds, const ForestConfig& cfg, std::uint64_t seed,
                    const std::filesystem::path& out, const Provenance& pv);
/// Rasterizes the top-k attributes named in `top_k_json` onto the imagery grid.
void rasterize_stage(const std::filesystem::path& cells, const std::filesystem::path& context,
                     const std::filesystem::path& top_k_json, const std::filesystem::path& imagery,
                     const std::filesystem::path& out_file, const Provenance& pv);
void train_s3_stage(const std::filesystem::path& imagery, const std::filesystem::path& morpho,
                    const std::filesystem::path& grid_labels, const std::filesystem::path& folds,
                    const ForestConfig& cfg, std::uint64_t seed, const std::filesystem::path& out,
                    const Provenance& pv);
/// Returns false, writing nothing, when `embeddings` holds no
/// `fold<k>.csv|.jsonl` for some fold.
bool train_s4_stage(const std::filesystem::path& embeddings, const std::filesystem::path& morpho,
                    const std::filesystem::path& reference, const std::filesystem::path& folds, const PatchSpec& spec,
                    const ForestConfig& cfg, std::uint64_t seed, const std::filesystem::path& out,
                    const Provenance& pv);

/// Scores `<site>/<scheme>/predictions.csv` (s2: the sidecar's per-fold grid
/// maps) and writes `<site>/evaluation/<scheme>.json` and the confusion CSV.
/// For s1 also writes the 100 m majority aggregate as `s1_grid`.
EvaluationReport evaluate_stage(const std::string& scheme, const std::filesystem::path& site, const Provenance& pv);

/// Maps of one fold's model over the whole site; `fold` < 0 picks the best.
std::vector<MapFiles> map_stage(const std::string& scheme, const std::filesystem::path& site, int fold,
                                const Provenance& pv);

// ---------- orchestration ----------

struct StageRun {
  std::string stage;
  bool cached = false;
  bool skipped = false;
  std::string note;
};

struct RunSummary {
  std::vector<StageRun> stages;
  std::filesystem::path output;
  nlohmann::json reports;  // scheme -> EvaluationReport JSON
};

/// ingest -> tessellate -> metrics -> context -> folds -> S1 -> rasterize ->
/// S3 -> S4 -> evaluate -> maps. Stages whose input hash matches their stamp
/// are reused. Failures surface as StageError naming the stage.
RunSummary run_pipeline(const SiteConfig& cfg);

/// sha256 of a file's bytes; empty path hashes to "".
std::string file_key(const std::filesystem::path& p);

}  // namespace morpholcz
