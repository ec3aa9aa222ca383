// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/fusion.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "morpholcz/error.hpp"
#include "morpholcz/hash.hpp"
#include "morpholcz/parallel.hpp"

namespace morpholcz {

namespace bgi = boost::geometry::index;
using geom::Box;
using geom::Point;

geom::Box Grid100::cell_box(std::size_t id) const {
  const double side = static_cast<double>(block) * pixels.pixel;
  const double c = static_cast<double>(id % ncols), r = static_cast<double>(id / ncols);
  return {{pixels.x0 + c * side, pixels.y0 - (r + 1) * side}, {pixels.x0 + (c + 1) * side, pixels.y0 - r * side}};
}

geom::Point Grid100::center(std::size_t id) const {
  const auto b = cell_box(id);
  return {(b.min_corner().x() + b.max_corner().x()) / 2, (b.min_corner().y() + b.max_corner().y()) / 2};
}

std::optional<std::size_t> Grid100::cell_of(const geom::Point& p) const {
  const double side = static_cast<double>(block) * pixels.pixel;
  const double fx = (p.x() - pixels.x0) / side, fy = (pixels.y0 - p.y()) / side;
  if (fx < 0 || fy < 0) return std::nullopt;
  const auto c = static_cast<std::size_t>(fx), r = static_cast<std::size_t>(fy);
  if (c >= ncols || r >= nrows) return std::nullopt;
  return r * ncols + c;
}

Grid100 make_grid100(const GridSpec& pixels, double cell_m) {
  Grid100 g;
  g.pixels = pixels;
  const double ratio = cell_m / pixels.pixel;
  g.block = static_cast<std::size_t>(std::llround(ratio));
  if (g.block == 0 || std::abs(ratio - static_cast<double>(g.block)) > 1e-9)
    throw ConfigError("aggregation cell size must be a whole number of pixels");
  g.ncols = pixels.width / g.block;
  g.nrows = pixels.height / g.block;
  return g;
}

std::vector<std::int64_t> cell_index_raster(const std::vector<EtcCell>& cells, const GridSpec& grid) {
  using Entry = std::pair<Box, std::size_t>;
  std::vector<Entry> e;
  for (std::size_t i = 0; i < cells.size(); ++i) e.push_back({geom::envelope(cells[i].polygon), i});
  bgi::rtree<Entry, bgi::quadratic<16>> tree(e.begin(), e.end());
  std::vector<std::int64_t> out(grid.width * grid.height, -1);
  parallel_for(grid.height, [&](std::size_t row) {
    std::vector<Entry> hits;
    for (std::size_t col = 0; col < grid.width; ++col) {
      const Point p = grid.pixel_center(col, row);
      hits.clear();
      tree.query(bgi::intersects(p), std::back_inserter(hits));
      std::int64_t best = -1;
      for (const auto& [box, i] : hits) {
        if (best >= 0 && cells[i].id >= cells[static_cast<std::size_t>(best)].id) continue;
        if (geom::bg::covered_by(p, cells[i].polygon)) best = static_cast<std::int64_t>(i);
      }
      out[row * grid.width + col] = best;
    }
  });
  return out;
}

Raster rasterize_attributes(const std::vector<EtcCell>& cells, std::optional<int> cells_epsg, const Table& context,
                            const std::vector<std::size_t>& subset, const GridSpec& grid) {
  if (cells_epsg && grid.epsg && *cells_epsg != *grid.epsg)
    throw DataError("CRS mismatch: cells are EPSG:" + std::to_string(*cells_epsg) + ", imagery is EPSG:" +
                    std::to_string(*grid.epsg));
  const auto idx = cell_index_raster(cells, grid);
  std::vector<std::size_t> row_of(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) row_of[i] = context.row_of(cells[i].id);
  Raster r;
  r.grid = grid;
  for (std::size_t c : subset) {
    if (c >= context.cols()) throw DataError("attribute index out of range: " + std::to_string(c));
    std::vector<double> band(idx.size(), kMissing);
    for (std::size_t p = 0; p < idx.size(); ++p)
      if (idx[p] >= 0) band[p] = context.at(row_of[static_cast<std::size_t>(idx[p])], c);
    r.add_band(context.columns[c], std::move(band));
  }
  return r;
}

// Means are accumulated as offsets from the first value so that a constant
// field comes back exactly.
Table zonal_s3(const Raster& stack, const Grid100& g) {
  if (!stack.grid.same_geometry(g.pixels)) throw DataError("zonal statistics: raster and grid are not aligned");
  std::vector<std::int64_t> ids(g.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
  std::vector<std::string> cols;
  for (const auto& n : stack.names)
    for (const char* s : {"_mean", "_max", "_min"}) cols.push_back(n + s);
  Table t(ids, cols);
  t.id_name = "cell100_id";
  const std::size_t w = stack.grid.width;
  parallel_for(g.size(), [&](std::size_t id) {
    const std::size_t c0 = (id % g.ncols) * g.block, r0 = (id / g.ncols) * g.block;
    for (std::size_t b = 0; b < stack.bands.size(); ++b) {
      double first = kMissing, sum = 0, mx = -INFINITY, mn = INFINITY;
      std::size_t n = 0;
      for (std::size_t r = r0; r < r0 + g.block; ++r)
        for (std::size_t c = c0; c < c0 + g.block; ++c) {
          const double v = stack.bands[b][r * w + c];
          if (std::isnan(v)) continue;
          if (n == 0) first = v;
          sum += v - first;
          mx = std::max(mx, v);
          mn = std::min(mn, v);
          ++n;
        }
      if (n == 0) continue;
      t.at(id, 3 * b) = first + sum / static_cast<double>(n);
      t.at(id, 3 * b + 1) = mx;
      t.at(id, 3 * b + 2) = mn;
    }
  });
  return t;
}

std::size_t patches_per_axis(double extent_m, const PatchSpec& spec) {
  if (extent_m + 1e-9 < spec.size_m) return 0;
  return static_cast<std::size_t>(std::floor((extent_m - spec.size_m) / spec.step_m + 1e-9)) + 1;
}

PatchIndex make_patches(const GridSpec& grid, const PatchSpec& spec, const std::vector<ReferencePolygon>* reference) {
  PatchIndex out;
  out.size_px = static_cast<std::size_t>(std::llround(spec.size_m / grid.pixel));
  const auto step_px = static_cast<std::size_t>(std::llround(spec.step_m / grid.pixel));
  const Grid100 g = make_grid100(grid, spec.step_m);
  const std::size_t nx = patches_per_axis(static_cast<double>(grid.width) * grid.pixel, spec);
  const std::size_t ny = patches_per_axis(static_cast<double>(grid.height) * grid.pixel, spec);
  std::optional<ReferenceIndex> index;
  if (reference) index.emplace(*reference);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      Patch p;
      p.col0 = i * step_px;
      p.row0 = j * step_px;
      if (p.col0 + out.size_px > grid.width || p.row0 + out.size_px > grid.height) {
        ++out.dropped;
        continue;
      }
      const Point centre = grid.pixel_center(p.col0 + out.size_px / 2, p.row0 + out.size_px / 2);
      const auto cell = g.cell_of(centre);
      if (!cell) {
        ++out.dropped;
        continue;
      }
      p.id = static_cast<std::int64_t>(*cell);
      if (index)
        if (auto k = index->find(centre)) {
          p.reference = *k;
          p.label = (*reference)[*k].lcz;
        }
      out.patches.push_back(p);
    }
  return out;
}

Table patch_stats(const Raster& morpho, const PatchIndex& pi) {
  std::vector<std::int64_t> ids;
  for (const auto& p : pi.patches) ids.push_back(p.id);
  std::vector<std::string> cols;
  for (const auto& n : morpho.names)
    for (const char* s : {"_mean", "_min", "_max", "_std", "_median"}) cols.push_back(n + s);
  Table t(ids, cols);
  t.id_name = "patch_id";
  const std::size_t w = morpho.grid.width;
  parallel_for(pi.patches.size(), [&](std::size_t k) {
    const auto& p = pi.patches[k];
    std::vector<double> v;
    for (std::size_t b = 0; b < morpho.bands.size(); ++b) {
      v.clear();
      for (std::size_t r = p.row0; r < p.row0 + pi.size_px; ++r)
        for (std::size_t c = p.col0; c < p.col0 + pi.size_px; ++c) {
          const double x = morpho.bands[b][r * w + c];
          if (!std::isnan(x)) v.push_back(x);
        }
      if (v.empty()) continue;
      const double n = static_cast<double>(v.size());
      double sum = 0;
      for (double x : v) sum += x - v.front();
      const double mean = v.front() + sum / n;
      double ss = 0;
      for (double x : v) ss += (x - mean) * (x - mean);
      std::sort(v.begin(), v.end());
      const std::size_t h = v.size() / 2;
      t.at(k, 5 * b) = mean;
      t.at(k, 5 * b + 1) = v.front();
      t.at(k, 5 * b + 2) = v.back();
      t.at(k, 5 * b + 3) = std::sqrt(ss / n);
      t.at(k, 5 * b + 4) = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    }
  });
  return t;
}

Labeling label_grid100(const Grid100& g, const std::vector<ReferencePolygon>& reference) {
  ReferenceIndex index(reference);
  Labeling out;
  out.label.resize(g.size());
  out.reference.resize(g.size());
  for (std::size_t id = 0; id < g.size(); ++id)
    if (auto k = index.find(g.center(id))) {
      out.reference[id] = *k;
      out.label[id] = reference[*k].lcz;
    }
  return out;
}

// ---- embeddings ----

std::filesystem::path embedding_sidecar(const std::filesystem::path& data) {
  return data.string() + ".json";
}

namespace {

bool is_jsonl(const std::filesystem::path& p) {
  const auto e = p.extension().string();
  return e == ".jsonl" || e == ".ndjson";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
    while (!cur.empty() && cur.front() == ' ') cur.erase(cur.begin());
    out.push_back(cur);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& t) {
  if (t.values.size() != t.rows() * t.dim) throw DataError("embedding table shape mismatch");
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    if (is_jsonl(path)) {
      for (std::size_t r = 0; r < t.rows(); ++r) {
        nlohmann::json j;
        j["patch_id"] = t.patch_ids[r];
        j["fold"] = t.folds[r];
        j["label"] = t.labels[r] ? nlohmann::json(*t.labels[r]) : nlohmann::json(nullptr);
        j["embedding"] = std::vector<double>(t.values.begin() + static_cast<std::ptrdiff_t>(r * t.dim),
                                             t.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * t.dim));
        f << j.dump() << '\n';
      }
    } else {
      f << "patch_id,fold,label";
      for (std::size_t k = 0; k < t.dim; ++k) f << ",e" << k;
      f << '\n';
      for (std::size_t r = 0; r < t.rows(); ++r) {
        f << t.patch_ids[r] << ',' << t.folds[r] << ',';
        if (t.labels[r]) f << *t.labels[r];
        for (std::size_t k = 0; k < t.dim; ++k) f << ',' << format_double(t.values[r * t.dim + k]);
        f << '\n';
      }
    }
  }
  nlohmann::json side = {{"dim", t.dim}, {"producer", t.producer}, {"fold", t.fold},
                         {"checksum", "sha256:" + sha256_file(path)}};
  std::ofstream s(embedding_sidecar(path));
  if (!s) throw DataError("cannot write " + embedding_sidecar(path).string());
  s << side.dump(2) << '\n';
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  const auto sp = embedding_sidecar(path);
  std::ifstream s(sp);
  if (!s) throw DataError("embedding sidecar not found: " + sp.string());
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(s);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed embedding sidecar " + sp.string() + ": " + e.what());
  }
  EmbeddingTable t;
  try {
    t.dim = side.at("dim").get<std::size_t>();
    t.fold = side.at("fold").get<int>();
    t.producer = side.value("producer", "");
    const std::string want = side.at("checksum").get<std::string>();
    const std::string got = "sha256:" + sha256_file(path);
    if (want != got) throw DataError("embedding checksum mismatch for " + path.string() + ": sidecar " + want + ", file " + got);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("incomplete embedding sidecar " + sp.string() + ": " + e.what());
  }
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path.string());
  std::set<std::int64_t> seen;
  auto add_row = [&](std::int64_t id, int fold, std::optional<int> label, const std::vector<double>& e) {
    if (e.size() != t.dim)
      throw DataError("patch " + std::to_string(id) + " has " + std::to_string(e.size()) + " embedding values, sidecar declares " + std::to_string(t.dim));
    if (!seen.insert(id).second) throw DataError("duplicate patch id in embeddings: " + std::to_string(id));
    t.patch_ids.push_back(id);
    t.folds.push_back(fold);
    t.labels.push_back(label);
    t.values.insert(t.values.end(), e.begin(), e.end());
  };
  std::string line;
  if (is_jsonl(path)) {
    while (std::getline(f, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        std::optional<int> label;
        if (j.contains("label") && !j["label"].is_null()) label = parse_lcz(j["label"]);
        add_row(j.at("patch_id").get<std::int64_t>(), j.value("fold", t.fold), label, j.at("embedding").get<std::vector<double>>());
      } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed embedding line in " + path.string() + ": " + e.what());
      }
    }
    return t;
  }
  if (!std::getline(f, line)) throw DataError("empty embedding file: " + path.string());
  const auto head = split_csv(line);
  std::optional<std::size_t> c_id, c_fold, c_label;
  std::vector<std::size_t> c_e;
  for (std::size_t i = 0; i < head.size(); ++i) {
    if (head[i] == "patch_id") c_id = i;
    else if (head[i] == "fold") c_fold = i;
    else if (head[i] == "label") c_label = i;
    else if (head[i] == "e" + std::to_string(c_e.size())) c_e.push_back(i);
    else throw DataError("unexpected embedding column '" + head[i] + "' in " + path.string());
  }
  if (!c_id) throw DataError("embedding file lacks a patch_id column: " + path.string());
  if (c_e.size() != t.dim)
    throw DataError("embedding file has " + std::to_string(c_e.size()) + " columns, sidecar declares " + std::to_string(t.dim));
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != head.size()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
    try {
      std::vector<double> e;
      for (std::size_t c : c_e) e.push_back(cells[c].empty() ? kMissing : std::stod(cells[c]));
      std::optional<int> label;
      if (c_label && !cells[*c_label].empty()) label = parse_lcz(cells[*c_label]);
      add_row(std::stoll(cells[*c_id]), c_fold ? std::stoi(cells[*c_fold]) : t.fold, label, e);
    } catch (const std::invalid_argument&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": unreadable number");
    }
  }
  return t;
}

Table assemble_s4(const EmbeddingTable& emb, const Table& stats) {
  std::unordered_map<std::int64_t, std::size_t> er;
  for (std::size_t r = 0; r < emb.rows(); ++r) er[emb.patch_ids[r]] = r;
  std::set<std::int64_t> stat_ids(stats.ids.begin(), stats.ids.end());
  std::vector<std::int64_t> missing_emb, extra_emb;
  for (auto id : stats.ids)
    if (!er.count(id)) missing_emb.push_back(id);
  for (auto id : emb.patch_ids)
    if (!stat_ids.count(id)) extra_emb.push_back(id);
  if (!missing_emb.empty() || !extra_emb.empty()) {
    auto list = [](const std::vector<std::int64_t>& v) {
      std::string s;
      for (auto id : v) s += (s.empty() ? "" : ", ") + std::to_string(id);
      return s;
    };
    std::string msg = "embedding/patch key mismatch;";
    if (!missing_emb.empty()) msg += " patches without embeddings: " + list(missing_emb) + ";";
    if (!extra_emb.empty()) msg += " embeddings for unknown patches: " + list(extra_emb) + ";";
    throw DataError(msg);
  }
  std::vector<std::string> cols;
  for (std::size_t k = 0; k < emb.dim; ++k) cols.push_back("e" + std::to_string(k));
  cols.insert(cols.end(), stats.columns.begin(), stats.columns.end());
  Table t(stats.ids, cols);
  t.id_name = "patch_id";
  t.meta = stats.meta;
  for (std::size_t r = 0; r < stats.rows(); ++r) {
    const std::size_t e = er[stats.ids[r]];
    for (std::size_t k = 0; k < emb.dim; ++k) t.at(r, k) = emb.values[e * emb.dim + k];
    for (std::size_t c = 0; c < stats.cols(); ++c) t.at(r, emb.dim + c) = stats.at(r, c);
  }
  return t;
}

}  // namespace morpholcz
