// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "morpholcz/context.hpp"
#include "morpholcz/error.hpp"
#include "morpholcz/fusion.hpp"
#include "morpholcz/hash.hpp"
#include "morpholcz/ingest.hpp"
#include "morpholcz/lcz.hpp"
#include "morpholcz/morphometrics.hpp"
#include "morpholcz/network.hpp"
#include "morpholcz/parallel.hpp"
#include "morpholcz/raster.hpp"
#include "morpholcz/tessellation.hpp"

namespace morpholcz {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------- small helpers ----------

namespace {

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw DataError("bad JSON in " + path.string() + ": " + e.what());
  }
}

json num(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

std::optional<std::int64_t> opt_id(const json& props, const char* key) {
  if (!props.contains(key) || props[key].is_null()) return std::nullopt;
  return props[key].get<std::int64_t>();
}

json opt_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

io::Crs crs_of(const fs::path& layer) { return io::read_layer(layer).crs; }

double combined(const Scores& s) { return s.f1 + (std::isnan(s.f1u) ? 0.0 : s.f1u); }
double combined(const EvaluationReport& r) {
  return (std::isnan(r.f1) ? 0.0 : r.f1) + (std::isnan(r.f1u) ? 0.0 : r.f1u);
}

json grid_json(const GridSpec& g, double cell_m) {
  json j = {{"x0", g.x0}, {"y0", g.y0}, {"pixel", g.pixel}, {"width", g.width}, {"height", g.height},
            {"cell_m", cell_m}};
  j["epsg"] = g.epsg ? json(*g.epsg) : json(nullptr);
  return j;
}

Grid100 grid_from_json(const json& j) {
  GridSpec g;
  g.x0 = j.at("x0").get<double>();
  g.y0 = j.at("y0").get<double>();
  g.pixel = j.at("pixel").get<double>();
  g.width = j.at("width").get<std::size_t>();
  g.height = j.at("height").get<std::size_t>();
  if (!j.at("epsg").is_null()) g.epsg = j.at("epsg").get<int>();
  return make_grid100(g, j.at("cell_m").get<double>());
}

GridSpec imagery_grid(const fs::path& imagery) { return read_geotiff(imagery).grid; }

}  // namespace

void Provenance::stamp(Table& t) const {
  t.meta["config_hash"] = config_hash;
  t.meta["seed"] = std::to_string(seed);
}

std::string file_key(const fs::path& p) {
  if (p.empty()) return "";
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += f.filename().string() + ':' + sha256_file(f) + ';';
    return sha256_hex(acc);
  }
  return sha256_file(p);
}

// ---------- layers ----------

void write_buildings(const fs::path& path, const std::vector<Building>& b, const io::Crs& crs, const Provenance& pv) {
  io::FeatureCollection fc;
  fc.crs = crs;
  fc.meta = pv.to_json();
  for (const auto& x : b) fc.features.push_back({x.id, x.footprint, json::object()});
  io::write_layer(path, fc, "buildings");
}

std::vector<Building> read_buildings(const fs::path& path) {
  const auto fc = io::read_layer(path);
  std::vector<Building> out;
  for (const auto& f : fc.features) {
    const auto parts = io::polygon_parts(f.geometry);
    if (parts.size() != 1) throw DataError("building " + std::to_string(f.id) + " is not a single polygon");
    out.push_back({f.id, parts[0]});
  }
  return out;
}

void write_network(const fs::path& path, const StreetNetwork& n, const io::Crs& crs, const Provenance& pv) {
  io::FeatureCollection fc;
  fc.crs = crs;
  fc.meta = pv.to_json();
  for (const auto& s : n.segments) fc.features.push_back({s.id, s.line, {{"length_m", s.length_m}}});
  io::write_layer(path, fc, "streets");
}

StreetNetwork read_network(const fs::path& path) {
  const auto fc = io::read_layer(path);
  StreetNetwork n;
  for (const auto& f : fc.features) {
    const auto parts = io::line_parts(f.geometry);
    if (parts.size() != 1) throw DataError("street " + std::to_string(f.id) + " is not a single line");
    StreetSegment s;
    s.id = f.id;
    s.line = parts[0];
    s.length_m = geom::bg::length(s.line);
    n.segments.push_back(std::move(s));
  }
  return n;
}

void write_cells(const fs::path& path, const std::vector<EtcCell>& cells, const io::Crs& crs, const Provenance& pv) {
  io::FeatureCollection fc;
  fc.crs = crs;
  fc.meta = pv.to_json();
  for (const auto& c : cells) {
    fc.features.push_back({c.id, c.polygon,
                           {{"building_id", c.building_id},
                            {"enclosure_id", c.enclosure_id},
                            {"street_id", opt_json(c.nearest_street_id)},
                            {"node_id", opt_json(c.nearest_node_id)},
                            {"edge_id", opt_json(c.nearest_edge_id)}}});
  }
  io::write_layer(path, fc, "cells");
}

std::vector<EtcCell> read_cells(const fs::path& path, io::Crs* crs) {
  const auto fc = io::read_layer(path);
  if (crs) *crs = fc.crs;
  std::vector<EtcCell> out;
  for (const auto& f : fc.features) {
    EtcCell c;
    c.id = f.id;
    for (auto& p : io::polygon_parts(f.geometry)) c.polygon.push_back(std::move(p));
    if (c.polygon.empty()) throw DataError("cell " + std::to_string(f.id) + " has no polygon");
    c.building_id = f.properties.value("building_id", std::int64_t{0});
    c.enclosure_id = f.properties.value("enclosure_id", std::int64_t{0});
    c.nearest_street_id = opt_id(f.properties, "street_id");
    c.nearest_node_id = opt_id(f.properties, "node_id");
    c.nearest_edge_id = opt_id(f.properties, "edge_id");
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ReferencePolygon> read_reference(const fs::path& path, const std::string& field) {
  return reference_from(io::load_layer(path, io::LayerKind::reference), field);
}

// ---------- ingest / tessellate / metrics / context ----------

IngestReport ingest_stage(const SitePaths& in, const IngestConfig& cfg, const fs::path& out, const Provenance& pv) {
  fs::create_directories(out);
  IngestReport rep;
  const auto braw = io::load_layer(in.buildings, io::LayerKind::buildings);
  rep.count("buildings_dropped_type", static_cast<std::int64_t>(braw.dropped));
  const auto buildings = preprocess_buildings(braw, cfg, &rep);
  const auto sraw = io::load_layer(in.streets, io::LayerKind::streets);
  rep.count("streets_dropped_type", static_cast<std::int64_t>(sraw.dropped));
  const auto net = preprocess_streets(sraw, cfg, &rep);

  std::vector<geom::LineString> waterlines;
  std::vector<geom::Polygon> waterbodies;
  if (!in.waterlines.empty())
    for (const auto& f : io::load_layer(in.waterlines, io::LayerKind::waterlines).features)
      for (auto& l : io::line_parts(f.geometry)) waterlines.push_back(std::move(l));
  if (!in.waterbodies.empty())
    for (const auto& f : io::load_layer(in.waterbodies, io::LayerKind::waterbodies).features)
      for (auto& p : io::polygon_parts(f.geometry)) waterbodies.push_back(std::move(p));
  std::vector<geom::Polygon> study;
  for (const auto& f : io::load_layer(in.study_area, io::LayerKind::study_area).features)
    for (auto& p : io::polygon_parts(f.geometry)) study.push_back(std::move(p));
  if (study.size() != 1) throw DataError("study area must be a single polygon, found " + std::to_string(study.size()));

  const auto cc = consistency_check(buildings, net, waterlines, waterbodies, &rep);
  const io::Crs crs = braw.crs;
  write_buildings(out / "buildings.geojson", cc.buildings, crs, pv);
  write_network(out / "streets.geojson", net, crs, pv);
  auto layer = [&](const fs::path& p, auto&& fill) {
    io::FeatureCollection fc;
    fc.crs = crs;
    fc.meta = pv.to_json();
    fill(fc);
    io::write_layer(p, fc, p.stem().string());
  };
  layer(out / "waterlines.geojson", [&](io::FeatureCollection& fc) {
    for (std::size_t i = 0; i < cc.waterlines.size(); ++i)
      fc.features.push_back({static_cast<std::int64_t>(i + 1), cc.waterlines[i], json::object()});
  });
  layer(out / "waterbodies.geojson", [&](io::FeatureCollection& fc) {
    for (std::size_t i = 0; i < waterbodies.size(); ++i)
      fc.features.push_back({static_cast<std::int64_t>(i + 1), waterbodies[i], json::object()});
  });
  layer(out / "study_area.geojson",
        [&](io::FeatureCollection& fc) { fc.features.push_back({1, study[0], json::object()}); });
  json r = rep.to_json();
  r["provenance"] = pv.to_json();
  r["buildings"] = cc.buildings.size();
  r["streets"] = net.segments.size();
  write_json(out / "report.json", r);
  spdlog::info("ingest: {} buildings, {} street segments", cc.buildings.size(), net.segments.size());
  return rep;
}

void tessellate_stage(const fs::path& in, const TessellationConfig& cfg, const fs::path& out, const Provenance& pv) {
  fs::create_directories(out);
  const auto buildings = read_buildings(in / "buildings.geojson");
  const io::Crs crs = crs_of(in / "buildings.geojson");
  const auto net = read_network(in / "streets.geojson");
  std::vector<geom::LineString> waterlines;
  for (const auto& f : io::read_layer(in / "waterlines.geojson").features)
    for (auto& l : io::line_parts(f.geometry)) waterlines.push_back(std::move(l));
  std::vector<geom::Polygon> waterbodies;
  for (const auto& f : io::read_layer(in / "waterbodies.geojson").features)
    for (auto& p : io::polygon_parts(f.geometry)) waterbodies.push_back(std::move(p));
  const auto study = io::polygon_parts(io::read_layer(in / "study_area.geojson").features.at(0).geometry).at(0);

  const auto enclosures = build_enclosures(net, waterlines, waterbodies, study);
  TessellationLog log;
  auto cells = tessellate(buildings, enclosures, cfg, &log);
  const auto graph = build_graph(net);
  link_elements(cells, buildings, net, graph);
  write_cells(out / "cells.geojson", cells, crs, pv);
  io::FeatureCollection enc;
  enc.crs = crs;
  enc.meta = pv.to_json();
  for (const auto& e : enclosures) enc.features.push_back({e.id, e.polygon, json::object()});
  io::write_layer(out / "enclosures.geojson", enc, "enclosures");
  write_json(out / "log.json", {{"provenance", pv.to_json()},
                                {"cells", cells.size()},
                                {"enclosures", enclosures.size()},
                                {"centroid_fallback", log.centroid_fallback},
                                {"outside", log.outside}});
  spdlog::info("tessellate: {} enclosures, {} cells", enclosures.size(), cells.size());
}

void metrics_stage(const fs::path& cells_path, const fs::path& buildings_path, const fs::path& network_path,
                   const MorphoConfig& cfg, const fs::path& out, const Provenance& pv) {
  fs::create_directories(out);
  const auto cells = read_cells(cells_path);
  const auto buildings = read_buildings(buildings_path);
  const auto net = read_network(network_path);
  const auto graph = build_graph(net);
  const auto contiguity = build_contiguity(cells);
  Table t = primary_matrix(buildings, cells, contiguity, net, graph, cfg);
  pv.stamp(t);
  write_csv(out / "primary.csv", t);
  json cat = catalog_json();
  write_json(out / "catalog.json", {{"provenance", pv.to_json()}, {"metrics", cat}});
  spdlog::info("metrics: {} cells x {} metrics", t.rows(), t.cols());
}

void context_stage(const fs::path& primary, const fs::path& cells_path, const ContextConfig& cfg,
                   const fs::path& out_file, const Provenance& pv) {
  const Table p = read_csv(primary);
  const auto cells = read_cells(cells_path);
  Table t = contextualize(p, build_contiguity(cells), cfg);
  pv.stamp(t);
  write_csv(out_file, t);
  spdlog::info("context: {} cells x {} attributes", t.rows(), t.cols());
}

// ---------- folds ----------

void folds_stage(const FoldsInputs& in, std::uint64_t seed, const fs::path& out, const Provenance& pv) {
  fs::create_directories(out);
  auto refs = split_singletons(read_reference(in.reference, in.class_field));
  const auto cells = read_cells(in.cells);
  const auto buildings = read_buildings(in.buildings);
  const auto lab = label_etcs(cells, buildings, refs, in.label_by_overlap);
  count_etcs(refs, lab);
  const auto by_etc = stratified_folds(refs, Stratification::etc_count, in.k, seed);
  const auto by_area = stratified_folds(refs, Stratification::area, in.k, seed);

  io::FeatureCollection fc;
  fc.crs = crs_of(in.cells);
  fc.meta = pv.to_json();
  for (const auto& r : refs) {
    fc.features.push_back({r.id, r.polygon,
                           {{"lcz", lcz_name(r.lcz)},
                            {"weight_etc", r.weight_etc},
                            {"weight_area", r.weight_area},
                            {"fold_etc", by_etc.fold.at(r.id)},
                            {"fold_area", by_area.fold.at(r.id)}}});
  }
  io::write_layer(out / "reference.geojson", fc, "reference");
  write_json(out / "folds.json", {{"provenance", pv.to_json()},
                                  {"k", in.k},
                                  {"etc_count", by_etc.to_json()},
                                  {"area", by_area.to_json()}});

  std::vector<std::int64_t> ids;
  for (const auto& c : cells) ids.push_back(c.id);
  Table labels(ids, {"lcz", "reference", "fold"});
  labels.id_name = "cell_id";
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!lab.label[i]) continue;
    const auto& r = refs[*lab.reference[i]];
    labels.at(i, 0) = r.lcz;
    labels.at(i, 1) = static_cast<double>(r.id);
    labels.at(i, 2) = by_etc.fold.at(r.id);
    ++labeled;
  }
  pv.stamp(labels);
  write_csv(out / "labels.csv", labels);

  if (!in.imagery.empty()) {
    const GridSpec g = imagery_grid(in.imagery);
    const Grid100 g100 = make_grid100(g, in.cell_m);
    const auto gl = label_grid100(g100, refs);
    std::vector<std::int64_t> gids;
    std::vector<std::size_t> rows;
    for (std::size_t id = 0; id < g100.size(); ++id)
      if (gl.label[id]) gids.push_back(static_cast<std::int64_t>(id)), rows.push_back(id);
    Table t(gids, {"lcz", "reference", "fold"});
    t.id_name = "grid_id";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& ref = refs[*gl.reference[rows[r]]];
      t.at(r, 0) = ref.lcz;
      t.at(r, 1) = static_cast<double>(ref.id);
      t.at(r, 2) = by_area.fold.at(ref.id);
    }
    pv.stamp(t);
    write_csv(out / "grid_labels.csv", t);
    write_json(out / "grid.json", grid_json(g, in.cell_m));
  }
  spdlog::info("folds: {} reference polygons, {} labeled cells", refs.size(), labeled);
}

std::map<std::int64_t, int> read_folds(const fs::path& path, Stratification kind, int* k) {
  const json j = read_json(path);
  if (k) *k = j.at("k").get<int>();
  std::map<std::int64_t, int> out;
  for (const auto& [id, f] : j.at(to_string(kind)).at("fold").items()) out[std::stoll(id)] = f.get<int>();
  return out;
}

Dataset make_dataset(const Table& features, const Table& labels, const std::map<std::int64_t, int>& folds) {
  const std::size_t lc = labels.column("lcz"), rc = labels.column("reference");
  Dataset d;
  d.d = features.cols();
  d.features = features.columns;
  for (std::size_t r = 0; r < labels.rows(); ++r) {
    const double l = labels.at(r, lc), ref = labels.at(r, rc);
    if (missing(l) || missing(ref)) continue;
    auto f = folds.find(static_cast<std::int64_t>(ref));
    if (f == folds.end()) throw DataError("reference polygon " + format_double(ref) + " has no fold");
    const std::size_t fr = features.row_of(labels.ids[r]);
    d.X.insert(d.X.end(), features.row(fr), features.row(fr) + d.d);
    d.y.push_back(static_cast<int>(l));
    d.ids.push_back(labels.ids[r]);
    d.folds.push_back(f->second);
  }
  d.n = d.y.size();
  if (d.n == 0) throw DataError("no labeled rows to train on");
  return d;
}

// ---------- scheme training ----------

namespace {

struct FoldRun {
  int fold = 0;
  ForestModel model;
  TuningReport tuning;
  std::vector<std::int64_t> ids;
  std::vector<int> truth, pred;
  Scores scores;
};

std::vector<int> feature_candidates(const ForestConfig& cfg, std::size_t d) {
  if (cfg.feature_grid.empty()) return feature_grid(d);
  std::set<int> s;
  for (int f : cfg.feature_grid) s.insert(std::clamp(f, 1, static_cast<int>(d)));
  return {s.begin(), s.end()};
}

}  // namespace

void train_scheme(const std::vector<Dataset>& per_fold, int k, const ForestConfig& cfg, std::uint64_t seed,
                  const fs::path& out, const Provenance& pv) {
  if (per_fold.empty() || (per_fold.size() != 1 && per_fold.size() != static_cast<std::size_t>(k)))
    throw DataError("scheme needs one dataset or one per fold");
  fs::create_directories(out);
  struct Candidate {
    Weighting w;
    std::vector<FoldRun> runs;
    EvaluationReport report;
  };
  std::vector<Candidate> cands;
  for (Weighting w : cfg.weightings) {
    Candidate c{w, {}, {}};
    for (int f = 0; f < k; ++f) {
      const Dataset& D = per_fold.size() == 1 ? per_fold[0] : per_fold[static_cast<std::size_t>(f)];
      const auto test = D.rows_in({f});
      const auto train_rows = D.rows_in({f}, true);
      if (test.empty()) {
        spdlog::warn("fold {} has no test rows; skipped", f);
        continue;
      }
      ForestParams base;
      base.n_trees = cfg.n_trees;
      base.weighting = w;
      base.seed = seed + static_cast<std::uint64_t>(f);
      auto t = tune(D, train_rows, test, base, cfg.depth_grid, feature_candidates(cfg, D.d), cfg.max_gap);
      FoldRun run;
      run.fold = f;
      run.pred = t.model.predict(D, test);
      for (auto r : test) run.ids.push_back(D.ids[r]), run.truth.push_back(D.y[r]);
      run.scores = scores(run.truth, run.pred);
      run.model = std::move(t.model);
      run.tuning = std::move(t.report);
      spdlog::info("  {} fold {}: OA {:.3f} F1 {:.3f}", to_string(w), f, run.scores.oa, run.scores.f1);
      c.runs.push_back(std::move(run));
    }
    if (c.runs.empty()) throw DataError("no fold has test rows");
    std::vector<Scores> s;
    for (const auto& r : c.runs) s.push_back(r.scores);
    c.report = aggregate_report(s);
    cands.push_back(std::move(c));
  }
  std::size_t chosen = 0;
  for (std::size_t i = 1; i < cands.size(); ++i)
    if (combined(cands[i].report) > combined(cands[chosen].report)) chosen = i;
  const auto& best = cands[chosen];
  std::size_t bf = 0;
  for (std::size_t i = 1; i < best.runs.size(); ++i)
    if (combined(best.runs[i].scores) > combined(best.runs[bf].scores)) bf = i;

  json wj = {{"provenance", pv.to_json()}, {"chosen", to_string(best.w)}, {"best_fold", best.runs[bf].fold}};
  for (const auto& c : cands)
    wj["candidates"][to_string(c.w)] = {{"oa", num(c.report.oa)},       {"f1", num(c.report.f1)},
                                        {"f1u", num(c.report.f1u)},     {"f1n", num(c.report.f1n)},
                                        {"f1_plus_f1u", combined(c.report)}};
  std::vector<int> folds;
  std::vector<std::int64_t> pid;
  std::vector<double> pf, pt, pp;
  for (const auto& r : best.runs) {
    folds.push_back(r.fold);
    json m = r.model.to_json();
    m["provenance"] = pv.to_json();
    write_json(out / ("fold" + std::to_string(r.fold) + ".model.json"), m);
    json tj = r.tuning.to_json();
    tj["provenance"] = pv.to_json();
    write_json(out / ("fold" + std::to_string(r.fold) + ".tuning.json"), tj);
    for (std::size_t i = 0; i < r.ids.size(); ++i) {
      pid.push_back(r.ids[i]);
      pf.push_back(r.fold);
      pt.push_back(r.truth[i]);
      pp.push_back(r.pred[i]);
    }
  }
  wj["folds"] = folds;
  write_json(out / "weighting.json", wj);
  Table pred(pid, {"fold", "truth", "pred"});
  for (std::size_t i = 0; i < pid.size(); ++i) {
    pred.at(i, 0) = pf[i];
    pred.at(i, 1) = pt[i];
    pred.at(i, 2) = pp[i];
  }
  pv.stamp(pred);
  write_csv(out / "predictions.csv", pred);

  const Dataset& D0 = per_fold.size() == 1 ? per_fold[0] : per_fold[static_cast<std::size_t>(best.runs[bf].fold)];
  const auto imp = importance(best.runs[bf].model);
  std::vector<std::int64_t> rank;
  for (std::size_t i = 0; i < imp.size(); ++i) rank.push_back(static_cast<std::int64_t>(i + 1));
  Table it(rank, {"feature_index", "score"});
  it.id_name = "rank";
  json names = json::array();
  for (std::size_t i = 0; i < imp.size(); ++i) {
    it.at(i, 0) = static_cast<double>(imp[i].feature);
    it.at(i, 1) = imp[i].score;
  }
  pv.stamp(it);
  write_csv(out / "importance.csv", it);
  for (auto f : top_k(imp, cfg.top_k)) names.push_back(D0.features[f]);
  write_json(out / "top_k.json",
             {{"provenance", pv.to_json()}, {"fold", best.runs[bf].fold}, {"k", cfg.top_k}, {"features", names}});
  spdlog::info("  chose {} weighting (F1 {:.3f}, F1U {:.3f}); best fold {}", to_string(best.w), best.report.f1,
               best.report.f1u, best.runs[bf].fold);
}

void train_s1_stage(const fs::path& features, const fs::path& labels, const fs::path& folds, const ForestConfig& cfg,
                    std::uint64_t seed, const fs::path& out, const Provenance& pv) {
  int k = 0;
  const auto fm = read_folds(folds, Stratification::etc_count, &k);
  train_scheme({make_dataset(read_csv(features), read_csv(labels), fm)}, k, cfg, seed, out, pv);
}

void rasterize_stage(const fs::path& cells_path, const fs::path& context, const fs::path& top_k_json,
                     const fs::path& imagery, const fs::path& out_file, const Provenance& pv) {
  io::Crs crs;
  const auto cells = read_cells(cells_path, &crs);
  const Table ctx = read_csv(context);
  std::vector<std::size_t> subset;
  const json top = read_json(top_k_json);
  for (const auto& name : top.at("features")) subset.push_back(ctx.column(name.get<std::string>()));
  const GridSpec g = imagery_grid(imagery);
  const Raster r = rasterize_attributes(cells, crs.epsg, ctx, subset, g);
  json meta = pv.to_json();
  if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
  write_geotiff(out_file, r, PixelType::float32, meta);
  spdlog::info("rasterize: {} bands on {}x{} pixels", r.bands.size(), g.width, g.height);
}

void train_s3_stage(const fs::path& imagery, const fs::path& morpho, const fs::path& grid_labels,
                    const fs::path& folds, const ForestConfig& cfg, std::uint64_t seed, const fs::path& out,
                    const Provenance& pv) {
  Raster stack = read_geotiff(imagery);
  const Raster m = read_geotiff(morpho);
  if (!stack.grid.same_geometry(m.grid)) throw DataError("morphometric raster does not match the imagery grid");
  for (std::size_t b = 0; b < m.bands.size(); ++b) stack.add_band(m.names[b], m.bands[b]);
  const Table labels = read_csv(grid_labels);
  const fs::path grid_json_path = grid_labels.parent_path() / "grid.json";
  const Grid100 g = fs::exists(grid_json_path) ? grid_from_json(read_json(grid_json_path)) : make_grid100(stack.grid);
  Table features = zonal_s3(stack, g);
  pv.stamp(features);
  fs::create_directories(out);
  write_csv(out / "features.csv", features);
  int k = 0;
  const auto fm = read_folds(folds, Stratification::area, &k);
  train_scheme({make_dataset(features, labels, fm)}, k, cfg, seed, out, pv);
}

namespace {

std::optional<fs::path> embedding_file(const fs::path& dir, int fold) {
  for (const char* ext : {".csv", ".jsonl", ".ndjson"}) {
    const fs::path p = dir / ("fold" + std::to_string(fold) + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

}  // namespace

bool train_s4_stage(const fs::path& embeddings, const fs::path& morpho, const fs::path& reference,
                    const fs::path& folds, const PatchSpec& spec, const ForestConfig& cfg, std::uint64_t seed,
                    const fs::path& out, const Provenance& pv) {
  int k = 0;
  const auto fm = read_folds(folds, Stratification::area, &k);
  std::vector<fs::path> files;
  for (int f = 0; f < k; ++f) {
    auto p = embeddings.empty() ? std::nullopt : embedding_file(embeddings, f);
    if (!p) return false;
    files.push_back(*p);
  }
  const Raster m = read_geotiff(morpho);
  const auto refs = read_reference(reference);
  const PatchIndex patches = make_patches(m.grid, spec, &refs);
  Table stats = patch_stats(m, patches);
  fs::create_directories(out);
  pv.stamp(stats);
  write_csv(out / "patch_stats.csv", stats);
  std::vector<std::int64_t> ids;
  for (const auto& p : patches.patches) ids.push_back(p.id);
  Table labels(ids, {"lcz", "reference"});
  for (std::size_t i = 0; i < patches.patches.size(); ++i) {
    const auto& p = patches.patches[i];
    if (!p.label) continue;
    labels.at(i, 0) = *p.label;
    labels.at(i, 1) = static_cast<double>(refs[*p.reference].id);
  }
  std::vector<Dataset> per_fold;
  for (int f = 0; f < k; ++f) {
    const auto emb = read_embeddings(files[static_cast<std::size_t>(f)]);
    if (emb.fold != f) throw DataError(files[static_cast<std::size_t>(f)].string() + " declares fold " + std::to_string(emb.fold));
    Table feat = assemble_s4(emb, stats);
    pv.stamp(feat);
    write_csv(out / ("features_fold" + std::to_string(f) + ".csv"), feat);
    per_fold.push_back(make_dataset(feat, labels, fm));
  }
  train_scheme(per_fold, k, cfg, seed, out, pv);
  return true;
}

// ---------- evaluation ----------

namespace {

std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_fold(const Table& pred) {
  std::map<int, std::pair<std::vector<int>, std::vector<int>>> out;
  const auto fc = pred.column("fold"), tc = pred.column("truth"), pc = pred.column("pred");
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    auto& [t, p] = out[static_cast<int>(pred.at(r, fc))];
    t.push_back(static_cast<int>(pred.at(r, tc)));
    p.push_back(static_cast<int>(pred.at(r, pc)));
  }
  return out;
}

EvaluationReport write_report(const std::string& scheme, const std::vector<Scores>& s, const std::vector<int>& folds,
                              const fs::path& site, const Provenance& pv, const json& extra = {}) {
  auto rep = aggregate_report(s);
  json j = rep.to_json();
  j["scheme"] = scheme;
  j["fold_ids"] = folds;
  j["provenance"] = pv.to_json();
  if (!extra.is_null()) j["training"] = extra;
  write_json(site / "evaluation" / (scheme + ".json"), j);
  rep.write_confusion_csv(site / "evaluation" / (scheme + "_confusion.csv"));
  spdlog::info("evaluate {}: OA {:.3f} F1 {:.3f} F1U {:.3f} F1N {:.3f}", scheme, rep.oa, rep.f1, rep.f1u, rep.f1n);
  return rep;
}

}  // namespace

EvaluationReport evaluate_stage(const std::string& scheme, const fs::path& site, const Provenance& pv) {
  if (scheme == "s2") {
    const json run = read_json(site / "run.json");
    const fs::path dir = run.at("config").at("paths").at("embeddings").get<std::string>();
    const Table gl = read_csv(site / "folds" / "grid_labels.csv");
    const Grid100 g = grid_from_json(read_json(site / "folds" / "grid.json"));
    const int k = read_json(site / "folds" / "folds.json").at("k").get<int>();
    std::vector<Scores> s;
    std::vector<int> folds;
    for (int f = 0; f < k; ++f) {
      const fs::path p = dir / ("s2_fold" + std::to_string(f) + ".tif");
      if (dir.empty() || !fs::exists(p)) throw DataError("no S2 map for fold " + std::to_string(f) + ": " + p.string());
      const Raster r = read_geotiff(p);
      if (r.grid.width != g.ncols || r.grid.height != g.nrows) throw DataError(p.string() + " is not on the 100 m grid");
      std::vector<int> t, pr;
      for (std::size_t i = 0; i < gl.rows(); ++i) {
        if (static_cast<int>(gl.at(i, gl.column("fold"))) != f) continue;
        const double v = r.bands.at(0)[static_cast<std::size_t>(gl.ids[i])];
        if (missing(v) || v <= 0) continue;
        t.push_back(static_cast<int>(gl.at(i, gl.column("lcz"))));
        pr.push_back(static_cast<int>(v));
      }
      if (t.empty()) continue;
      s.push_back(scores(t, pr));
      folds.push_back(f);
    }
    return write_report("s2", s, folds, site, pv);
  }
  if (scheme != "s1" && scheme != "s3" && scheme != "s4") throw ConfigError("unknown scheme: " + scheme);
  const fs::path pred_path = site / scheme / "predictions.csv";
  if (!fs::exists(pred_path)) throw DataError("no predictions for " + scheme + " in " + site.string());
  const Table pred = read_csv(pred_path);
  const json training = read_json(site / scheme / "weighting.json");
  std::vector<Scores> s;
  std::vector<int> folds;
  for (const auto& [f, tp] : by_fold(pred)) {
    s.push_back(scores(tp.first, tp.second));
    folds.push_back(f);
  }
  auto rep = write_report(scheme, s, folds, site, pv, training);

  if (scheme == "s1" && fs::exists(site / "folds" / "grid.json")) {
    const Grid100 g = grid_from_json(read_json(site / "folds" / "grid.json"));
    const auto cells = read_cells(site / "tessellation" / "cells.geojson");
    const Table gl = read_csv(site / "folds" / "grid_labels.csv");
    const auto etc_folds = read_folds(site / "folds" / "folds.json", Stratification::etc_count);
    std::map<std::int64_t, std::size_t> cell_row;
    for (std::size_t i = 0; i < cells.size(); ++i) cell_row[cells[i].id] = i;
    std::vector<Scores> gs;
    std::vector<int> gf;
    for (int f : folds) {
      std::vector<std::optional<int>> labels(cells.size());
      for (std::size_t r = 0; r < pred.rows(); ++r)
        if (static_cast<int>(pred.at(r, 0)) == f) labels[cell_row.at(pred.ids[r])] = static_cast<int>(pred.at(r, 2));
      const auto grid = s1_to_grid(cells, labels, g);
      std::vector<int> t, p;
      for (std::size_t i = 0; i < gl.rows(); ++i) {
        const auto ref = static_cast<std::int64_t>(gl.at(i, gl.column("reference")));
        if (etc_folds.at(ref) != f) continue;
        const int v = grid[static_cast<std::size_t>(gl.ids[i])];
        if (v == 0) continue;
        t.push_back(static_cast<int>(gl.at(i, gl.column("lcz"))));
        p.push_back(v);
      }
      if (t.empty()) continue;
      gs.push_back(scores(t, p));
      gf.push_back(f);
    }
    if (!gs.empty()) write_report("s1_grid", gs, gf, site, pv);
  }
  return rep;
}

// ---------- maps ----------

std::vector<MapFiles> map_stage(const std::string& scheme, const fs::path& site, int fold, const Provenance& pv) {
  if (scheme != "s1" && scheme != "s3" && scheme != "s4") throw ConfigError("no map for scheme " + scheme);
  const json w = read_json(site / scheme / "weighting.json");
  if (fold < 0) fold = w.at("best_fold").get<int>();
  const fs::path model_path = site / scheme / ("fold" + std::to_string(fold) + ".model.json");
  if (!fs::exists(model_path)) throw DataError("no model for fold " + std::to_string(fold));
  const ForestModel model = ForestModel::from_json(read_json(model_path));
  const fs::path features_path = scheme == "s1"   ? site / "context" / "context.csv"
                                 : scheme == "s3" ? site / scheme / "features.csv"
                                                  : site / scheme / ("features_fold" + std::to_string(fold) + ".csv");
  const Table features = read_csv(features_path);
  if (features.cols() != model.n_features) throw DataError("feature table does not match the model");
  std::vector<int> pred(features.rows());
  parallel_for(features.rows(), [&](std::size_t r) { pred[r] = model.predict(features.row(r)); });

  json meta = pv.to_json();
  meta["scheme"] = scheme;
  meta["fold"] = fold;
  meta["weighting"] = w.at("chosen");
  const fs::path dir = site / "maps";
  fs::create_directories(dir);
  const std::string stem = scheme + "_fold" + std::to_string(fold);
  std::vector<MapFiles> out;
  const bool has_grid = fs::exists(site / "folds" / "grid.json");
  if (scheme == "s1") {
    io::Crs crs;
    const auto cells = read_cells(site / "tessellation" / "cells.geojson", &crs);
    std::vector<std::optional<int>> labels(cells.size());
    std::map<std::int64_t, std::size_t> row;
    for (std::size_t r = 0; r < features.rows(); ++r) row[features.ids[r]] = r;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (auto it = row.find(cells[i].id); it != row.end()) labels[i] = pred[it->second];
    GridSpec render;
    if (has_grid) {
      render = grid_from_json(read_json(site / "folds" / "grid.json")).pixels;
    } else {
      geom::Box env = geom::envelope(cells.at(0).polygon);
      for (const auto& c : cells) geom::bg::expand(env, geom::envelope(c.polygon));
      render.x0 = std::floor(env.min_corner().x() / 10) * 10;
      render.y0 = std::ceil(env.max_corner().y() / 10) * 10;
      render.width = static_cast<std::size_t>(std::ceil((env.max_corner().x() - render.x0) / 10));
      render.height = static_cast<std::size_t>(std::ceil((render.y0 - env.min_corner().y()) / 10));
    }
    out.push_back(emit_cell_map(cells, labels, crs, render, dir / (stem + "_cells"), meta));
    if (has_grid) {
      const Grid100 g = grid_from_json(read_json(site / "folds" / "grid.json"));
      out.push_back(emit_grid_map(s1_to_grid(cells, labels, g), g, dir / (stem + "_grid"), meta));
    }
  } else {
    const Grid100 g = grid_from_json(read_json(site / "folds" / "grid.json"));
    std::vector<int> grid(g.size(), 0);
    for (std::size_t r = 0; r < features.rows(); ++r) grid.at(static_cast<std::size_t>(features.ids[r])) = pred[r];
    out.push_back(emit_grid_map(grid, g, dir / (stem + "_grid"), meta));
  }
  return out;
}

// ---------- orchestration ----------

namespace {

class Runner {
 public:
  Runner(fs::path root, Provenance pv) : root_(std::move(root)), pv_(std::move(pv)) {}

  /// Runs `fn` unless the stage stamp holds `key`. Returns false when the
  /// stage body reported that it had nothing to do.
  template <class Fn>
  bool stage(const std::string& name, const std::string& key, Fn&& fn) {
    const fs::path dir = root_ / name;
    const fs::path stamp = dir / "stamp.json";
    if (fs::exists(stamp)) {
      try {
        const json j = read_json(stamp);
        if (j.value("key", "") == key) {
          const bool ran = j.value("ran", true);
          summary.stages.push_back({name, true, !ran, ran ? "" : j.value("note", "")});
          spdlog::info("{}: cached", name);
          return ran;
        }
      } catch (const DataError&) {
      }
    }
    if (fs::exists(dir)) fs::remove_all(dir);
    fs::create_directories(dir);
    const auto t0 = std::chrono::steady_clock::now();
    std::string note;
    bool ran = true;
    try {
      ran = fn(dir, note);
    } catch (const ConfigError&) {
      throw;
    } catch (const DataError& e) {
      throw DataError(name + ": " + e.what());
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    json j = {{"stage", name}, {"key", key}, {"ran", ran}, {"note", note}};
    j.update(pv_.to_json());
    write_json(stamp, j);
    summary.stages.push_back({name, false, !ran, note});
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ran) spdlog::info("{}: done in {:.1f} s", name, sec);
    else spdlog::warn("{}: skipped ({})", name, note);
    return ran;
  }

  RunSummary summary;

 private:
  fs::path root_;
  Provenance pv_;
};

std::string key_of(const json& parts) { return sha256_hex(parts.dump()); }

}  // namespace

RunSummary run_pipeline(const SiteConfig& cfg) {
  check_inputs(cfg);
  const Provenance pv{cfg.hash(), cfg.seed};
  const fs::path root = cfg.paths.output;
  fs::create_directories(root);
  json run = {{"config", cfg.to_json()}, {"provenance", pv.to_json()}};
  write_json(root / "run.json", run);
  const json c = cfg.to_json();
  Runner R(root, pv);

  const std::string k_ingest = key_of({"ingest", c["ingest"], file_key(cfg.paths.buildings),
                                       file_key(cfg.paths.streets), file_key(cfg.paths.waterlines),
                                       file_key(cfg.paths.waterbodies), file_key(cfg.paths.study_area)});
  R.stage("ingest", k_ingest, [&](const fs::path& dir, std::string&) {
    ingest_stage(cfg.paths, cfg.ingest, dir, pv);
    return true;
  });
  const std::string k_tess = key_of({"tessellation", k_ingest, c["tessellation"]});
  R.stage("tessellation", k_tess, [&](const fs::path& dir, std::string&) {
    tessellate_stage(root / "ingest", cfg.tessellation, dir, pv);
    return true;
  });
  const fs::path cells = root / "tessellation" / "cells.geojson";
  const std::string k_metrics = key_of({"metrics", k_tess, c["morphometrics"]});
  R.stage("metrics", k_metrics, [&](const fs::path& dir, std::string&) {
    metrics_stage(cells, root / "ingest" / "buildings.geojson", root / "ingest" / "streets.geojson",
                  cfg.morphometrics, dir, pv);
    return true;
  });
  const std::string k_context = key_of({"context", k_metrics, c["context"]});
  R.stage("context", k_context, [&](const fs::path& dir, std::string&) {
    context_stage(root / "metrics" / "primary.csv", cells, cfg.context, dir / "context.csv", pv);
    return true;
  });
  const std::string k_folds = key_of({"folds", k_tess, c["reference"], c["evaluation"], c["fusion"], cfg.seed,
                                      file_key(cfg.paths.reference), file_key(cfg.paths.imagery)});
  R.stage("folds", k_folds, [&](const fs::path& dir, std::string&) {
    FoldsInputs in;
    in.reference = cfg.paths.reference;
    in.cells = cells;
    in.buildings = root / "ingest" / "buildings.geojson";
    in.imagery = cfg.paths.imagery;
    in.class_field = cfg.class_field;
    in.label_by_overlap = cfg.label_by_overlap;
    in.k = cfg.folds;
    in.cell_m = cfg.cell_m;
    folds_stage(in, cfg.seed, dir, pv);
    return true;
  });

  std::vector<std::string> schemes;
  const std::string k_s1 = key_of({"s1", k_context, k_folds, c["forest"], cfg.seed});
  if (cfg.s1 || cfg.s3 || cfg.s4) {
    // S3 and S4 need the attribute ranking of the S1 model
    R.stage("s1", k_s1, [&](const fs::path& dir, std::string&) {
      train_s1_stage(root / "context" / "context.csv", root / "folds" / "labels.csv", root / "folds" / "folds.json",
                     cfg.forest, cfg.seed, dir, pv);
      return true;
    });
    if (cfg.s1) schemes.push_back("s1");
  }
  const std::string k_raster = key_of({"rasterize", k_s1, file_key(cfg.paths.imagery)});
  const bool fusion = (cfg.s3 || cfg.s4) && !cfg.paths.imagery.empty();
  if (fusion) {
    R.stage("rasterize", k_raster, [&](const fs::path& dir, std::string&) {
      rasterize_stage(cells, root / "context" / "context.csv", root / "s1" / "top_k.json", cfg.paths.imagery,
                      dir / "morpho.tif", pv);
      return true;
    });
  }
  const fs::path morpho = root / "rasterize" / "morpho.tif";
  if (fusion && cfg.s3) {
    const std::string k = key_of({"s3", k_raster, k_folds, c["forest"], cfg.seed});
    R.stage("s3", k, [&](const fs::path& dir, std::string&) {
      train_s3_stage(cfg.paths.imagery, morpho, root / "folds" / "grid_labels.csv", root / "folds" / "folds.json",
                     cfg.forest, cfg.seed, dir, pv);
      return true;
    });
    schemes.push_back("s3");
  }
  if (fusion && cfg.s4) {
    const std::string k = key_of({"s4", k_raster, k_folds, c["forest"], cfg.seed, file_key(cfg.paths.embeddings)});
    const bool ran = R.stage("s4", k, [&](const fs::path& dir, std::string& note) {
      if (train_s4_stage(cfg.paths.embeddings, morpho, root / "folds" / "reference.geojson",
                         root / "folds" / "folds.json", cfg.patch, cfg.forest, cfg.seed, dir, pv))
        return true;
      note = "no embeddings for every fold in '" + cfg.paths.embeddings.string() + "'";
      return false;
    });
    if (ran) schemes.push_back("s4");
  }

  json scheme_keys = json::array();
  for (const auto& s : schemes) scheme_keys.push_back(s);
  const std::string k_eval = key_of({"evaluation", k_s1, k_raster, k_folds, scheme_keys, c["forest"], c["fusion"],
                                     file_key(cfg.paths.embeddings)});
  R.stage("evaluation", k_eval, [&](const fs::path&, std::string&) {
    json summary = {{"provenance", pv.to_json()}, {"site", cfg.name}};
    for (const auto& s : schemes) {
      const auto rep = evaluate_stage(s, root, pv);
      summary["schemes"][s] = {{"oa", num(rep.oa)}, {"f1", num(rep.f1)}, {"f1u", num(rep.f1u)}, {"f1n", num(rep.f1n)}};
    }
    write_json(root / "evaluation" / "summary.json", summary);
    return true;
  });
  R.stage("maps", key_of({"maps", k_eval}), [&](const fs::path&, std::string&) {
    for (const auto& s : schemes) map_stage(s, root, -1, pv);
    return true;
  });

  RunSummary out = std::move(R.summary);
  out.output = root;
  for (const auto& s : schemes) out.reports[s] = read_json(root / "evaluation" / (s + ".json"));
  if (fs::exists(root / "evaluation" / "s1_grid.json"))
    out.reports["s1_grid"] = read_json(root / "evaluation" / "s1_grid.json");
  return out;
}

}  // namespace morpholcz
