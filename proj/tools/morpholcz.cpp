// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: one subcommand per pipeline stage plus `run`.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <string>

#include "morpholcz/config.hpp"
#include "morpholcz/error.hpp"
#include "morpholcz/parallel.hpp"
#include "morpholcz/pipeline.hpp"
#include "morpholcz/synth.hpp"

namespace fs = std::filesystem;
using namespace morpholcz;

namespace {

SiteConfig config_or_default(const std::string& path) { return path.empty() ? SiteConfig{} : load_config(path); }

Provenance provenance(const SiteConfig& c) { return {c.hash(), c.seed}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morpholcz: Local Climate Zones from urban morphometrics"};
  app.require_subcommand(1);
  unsigned jobs = 0;
  std::string config;
  bool quiet = false;
  app.add_option("--jobs,-j", jobs, "worker threads (0: all cores)");
  app.add_flag("--quiet,-q", quiet, "warnings and errors only");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "load and clean vector layers");
  SitePaths ip;
  std::string out;
  ingest->add_option("--buildings", ip.buildings)->required();
  ingest->add_option("--streets", ip.streets)->required();
  ingest->add_option("--waterlines", ip.waterlines);
  ingest->add_option("--waterbodies", ip.waterbodies);
  ingest->add_option("--study-area", ip.study_area)->required();
  ingest->add_option("--out", out)->required();
  ingest->add_option("--config", config);

  // tessellate
  auto* tess = app.add_subcommand("tessellate", "enclosures and enclosed tessellation cells");
  std::string in_dir;
  double segment = -1, shrink = -1;
  tess->add_option("--in", in_dir, "ingest output directory")->required();
  tess->add_option("--out", out)->required();
  tess->add_option("--segment", segment, "boundary densification step, m");
  tess->add_option("--shrink", shrink, "inward footprint offset, m");
  tess->add_option("--config", config);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "107 primary morphometrics per cell");
  std::string cells, buildings, network;
  metrics->add_option("--cells", cells)->required();
  metrics->add_option("--buildings", buildings)->required();
  metrics->add_option("--network", network)->required();
  metrics->add_option("--out", out)->required();
  metrics->add_option("--config", config);

  // context
  auto* context = app.add_subcommand("context", "percentile contextualization over contiguity steps");
  std::string primary;
  context->add_option("--primary", primary)->required();
  context->add_option("--cells", cells)->required();
  context->add_option("--out", out, "output CSV")->required();
  context->add_option("--config", config);

  // folds
  auto* folds = app.add_subcommand("folds", "singleton split, labels and stratified folds");
  FoldsInputs fin;
  folds->add_option("--reference", fin.reference)->required();
  folds->add_option("--cells", fin.cells)->required();
  folds->add_option("--buildings", fin.buildings)->required();
  folds->add_option("--imagery", fin.imagery, "also label the 100 m grid of this raster");
  folds->add_option("--out", out)->required();
  folds->add_option("--config", config);

  // train-s1
  auto* s1 = app.add_subcommand("train-s1", "scheme S1: forest on contextual morphometrics");
  std::string features, labels, folds_json;
  s1->add_option("--features", features)->required();
  s1->add_option("--labels", labels)->required();
  s1->add_option("--folds", folds_json)->required();
  s1->add_option("--out", out)->required();
  s1->add_option("--config", config);

  // rasterize / train-s3 / train-s4
  auto* rast = app.add_subcommand("rasterize", "top-k attributes onto the imagery grid");
  std::string site, imagery;
  rast->add_option("--site", site, "pipeline output directory")->required();
  rast->add_option("--imagery", imagery)->required();
  rast->add_option("--config", config);
  auto* s3 = app.add_subcommand("train-s3", "scheme S3: zonal statistics of imagery and morphometrics");
  s3->add_option("--site", site)->required();
  s3->add_option("--imagery", imagery)->required();
  s3->add_option("--config", config);
  auto* s4 = app.add_subcommand("train-s4", "scheme S4: CNN embeddings with patch statistics");
  std::string embeddings;
  s4->add_option("--site", site)->required();
  s4->add_option("--embeddings", embeddings, "directory of fold<k>.csv|jsonl")->required();
  s4->add_option("--config", config);

  // evaluate / map
  auto* eval = app.add_subcommand("evaluate", "score a scheme's cross-validated predictions");
  std::string scheme;
  eval->add_option("--scheme", scheme)->required()->check(CLI::IsMember({"s1", "s2", "s3", "s4"}));
  eval->add_option("--site", site)->required();
  eval->add_option("--config", config);
  auto* map = app.add_subcommand("map", "LCZ map of one fold's model");
  std::string fold = "best";
  scheme = "s1";
  map->add_option("--scheme", scheme)->check(CLI::IsMember({"s1", "s3", "s4"}));
  map->add_option("--site", site)->required();
  map->add_option("--fold", fold, "fold index or 'best'");
  map->add_option("--config", config);

  // synth / run
  auto* synth = app.add_subcommand("synth", "write the four-district synthetic city");
  std::uint64_t seed = 42;
  synth->add_option("--out", out)->required();
  synth->add_option("--seed", seed);
  auto* run = app.add_subcommand("run", "whole pipeline for one site");
  run->add_option("--config", config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");
  set_jobs(jobs);

  try {
    const SiteConfig cfg = config_or_default(config);
    const Provenance pv = provenance(cfg);
    if (*ingest) {
      ingest_stage(ip, cfg.ingest, out, pv);
    } else if (*tess) {
      auto tc = cfg.tessellation;
      if (segment > 0) tc.segment_len = segment;
      if (shrink >= 0) tc.shrink = shrink;
      tessellate_stage(in_dir, tc, out, pv);
    } else if (*metrics) {
      metrics_stage(cells, buildings, network, cfg.morphometrics, out, pv);
    } else if (*context) {
      context_stage(primary, cells, cfg.context, out, pv);
    } else if (*folds) {
      fin.class_field = cfg.class_field;
      fin.label_by_overlap = cfg.label_by_overlap;
      fin.k = cfg.folds;
      fin.cell_m = cfg.cell_m;
      folds_stage(fin, cfg.seed, out, pv);
    } else if (*s1) {
      train_s1_stage(features, labels, folds_json, cfg.forest, cfg.seed, out, pv);
    } else if (*rast) {
      const fs::path s = site;
      rasterize_stage(s / "tessellation" / "cells.geojson", s / "context" / "context.csv", s / "s1" / "top_k.json",
                      imagery, s / "rasterize" / "morpho.tif", pv);
    } else if (*s3) {
      const fs::path s = site;
      train_s3_stage(imagery, s / "rasterize" / "morpho.tif", s / "folds" / "grid_labels.csv",
                     s / "folds" / "folds.json", cfg.forest, cfg.seed, s / "s3", pv);
    } else if (*s4) {
      const fs::path s = site;
      if (!train_s4_stage(embeddings, s / "rasterize" / "morpho.tif", s / "folds" / "reference.geojson",
                          s / "folds" / "folds.json", cfg.patch, cfg.forest, cfg.seed, s / "s4", pv))
        throw DataError("embeddings directory lacks a table for some fold: " + embeddings);
    } else if (*eval) {
      const auto r = evaluate_stage(scheme, site, pv);
      std::cout << r.to_json().dump(2) << '\n';
    } else if (*map) {
      int f = -1;
      if (fold != "best") {
        try {
          f = std::stoi(fold);
        } catch (const std::exception&) {
          throw ConfigError("--fold must be an index or 'best'");
        }
      }
      for (const auto& m : map_stage(scheme, site, f, pv)) std::cout << m.data.string() << '\n';
    } else if (*synth) {
      const auto city = synth_city(default_districts(), seed);
      const auto ini = write_synth_site(city, out, seed);
      spdlog::info("synth: {} buildings, {} streets, {} reference polygons", city.buildings.size(),
                   city.streets.segments.size(), city.reference.size());
      std::cout << ini.string() << '\n';
    } else if (*run) {
      const auto summary = run_pipeline(cfg);
      for (const auto& s : summary.stages)
        std::cout << s.stage << (s.cached ? " (cached)" : "") << (s.skipped ? " skipped: " + s.note : "") << '\n';
      std::cout << summary.reports.dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const DataError& e) {
    spdlog::error("data: {}", e.what());
    return 3;
  } catch (const StageError& e) {
    spdlog::error("stage {}", e.what());
    return 4;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 4;
  }
  return 0;
}
