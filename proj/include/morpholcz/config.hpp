// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morpholcz/context.hpp"
#include "morpholcz/evaluation.hpp"
#include "morpholcz/forest.hpp"
#include "morpholcz/fusion.hpp"
#include "morpholcz/ingest.hpp"
#include "morpholcz/morphometrics.hpp"
#include "morpholcz/tessellation.hpp"

namespace morpholcz {

struct SitePaths {
  std::filesystem::path buildings, streets, waterlines, waterbodies, study_area, reference, imagery;
  std::filesystem::path embeddings;  // directory of per-fold EmbeddingTables; optional
  std::filesystem::path output;
};

struct ForestConfig {
  int n_trees = 100;
  std::vector<int> depth_grid = default_depth_grid();  // -1: unbounded
  std::vector<int> feature_grid;                       // empty: derived from d
  double max_gap = 0.05;
  std::vector<Weighting> weightings = {Weighting::uniform, Weighting::inverse_frequency};
  std::size_t top_k = 20;
};

struct SiteConfig {
  std::string name = "site";
  std::uint64_t seed = 42;
  SitePaths paths;
  IngestConfig ingest;
  TessellationConfig tessellation;
  MorphoConfig morphometrics;
  ContextConfig context;
  std::string class_field = "lcz";
  bool label_by_overlap = false;
  int folds = 5;
  ForestConfig forest;
  PatchSpec patch;
  double cell_m = 100.0;
  bool s1 = true, s3 = true, s4 = true;

  /// Effective configuration with every key, paths as resolved.
  nlohmann::json to_json() const;
  /// sha256 of the canonical JSON form without the paths section, so the
  /// hash names the parameters and not where the files live.
  std::string hash() const;
  /// Writes the INI form that load_config reads back.
  void save(const std::filesystem::path& path) const;
};

/// Reads a sectioned key/value file; unknown keys are rejected, relative
/// paths resolve against the file's directory. Throws ConfigError.
SiteConfig load_config(const std::filesystem::path& path);
/// Throws ConfigError naming the first required input that does not exist.
void check_inputs(const SiteConfig& cfg);

}  // namespace morpholcz
