// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/evaluation.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "morpholcz/error.hpp"
#include "morpholcz/parallel.hpp"
#include "morpholcz/raster.hpp"

namespace morpholcz {

namespace bg = geom::bg;
namespace bgi = boost::geometry::index;
using geom::Box;
using geom::MultiPolygon;
using geom::Point;
using geom::Polygon;

// ---------- singleton split ----------

namespace {

// Everything on the side p . u <= s of a line, as a rectangle large enough
// to cover the polygon.
Polygon half_plane(const Point& c, double ux, double uy, double s, double reach) {
  const double vx = -uy, vy = ux;
  auto at = [&](double a, double b) { return Point(c.x() + ux * a + vx * b, c.y() + uy * a + vy * b); };
  Polygon h;
  h.outer() = {at(-reach, -reach), at(s, -reach), at(s, reach), at(-reach, reach), at(-reach, -reach)};
  bg::correct(h);
  return h;
}

double area_below(const Polygon& p, const Point& c, double ux, double uy, double s, double reach) {
  MultiPolygon out;
  bg::intersection(p, half_plane(c, ux, uy, s, reach), out);
  return bg::area(out);
}

}  // namespace

std::optional<std::pair<Polygon, Polygon>> bisect_polygon(const Polygon& p, double deg) {
  const double ux = std::cos(deg * M_PI / 180.0), uy = std::sin(deg * M_PI / 180.0);
  const Point c = geom::centroid(p);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& q : p.outer()) {
    const double s = (q.x() - c.x()) * ux + (q.y() - c.y()) * uy;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  const Box env = geom::envelope(p);
  const double reach = 2.0 * (bg::distance(env.min_corner(), env.max_corner()) + 1.0);
  const double total = bg::area(p);
  for (int it = 0; it < 100 && hi - lo > 1e-12 * reach; ++it) {
    const double mid = 0.5 * (lo + hi);
    (area_below(p, c, ux, uy, mid, reach) < total / 2 ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  const Polygon h = half_plane(c, ux, uy, s, reach);
  MultiPolygon a, b;
  bg::intersection(p, h, a);
  bg::difference(p, h, b);
  if (a.size() != 1 || b.size() != 1) return std::nullopt;
  if (!(bg::area(a[0]) > 1e-9 * total) || !(bg::area(b[0]) > 1e-9 * total)) return std::nullopt;
  return std::make_pair(a[0], b[0]);
}

std::vector<ReferencePolygon> split_singletons(const std::vector<ReferencePolygon>& refs) {
  std::map<int, int> count;
  std::int64_t next = 0;
  for (const auto& r : refs) {
    ++count[r.lcz];
    next = std::max(next, r.id + 1);
  }
  std::vector<ReferencePolygon> out;
  for (const auto& r : refs) {
    if (count[r.lcz] != 1) {
      out.push_back(r);
      continue;
    }
    const auto mrr = geom::min_rotated_rectangle(geom::exterior_points(geom::to_multi(r.polygon)));
    auto parts = bisect_polygon(r.polygon, mrr.long_side_deg);
    if (!parts) parts = bisect_polygon(r.polygon, mrr.long_side_deg + 90.0);
    if (!parts) throw DataError("cannot split singleton reference polygon " + std::to_string(r.id));
    ReferencePolygon a = r, b = r;
    a.polygon = parts->first;
    b.polygon = parts->second;
    b.id = next++;
    a.weight_area = bg::area(a.polygon) / 10000.0;
    b.weight_area = bg::area(b.polygon) / 10000.0;
    a.weight_etc = b.weight_etc = 0.0;
    out.push_back(std::move(a));
    out.push_back(std::move(b));
  }
  return out;
}

// ---------- folds ----------

std::string to_string(Stratification s) { return s == Stratification::etc_count ? "etc_count" : "area"; }

nlohmann::json FoldAssignment::to_json() const {
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [id, f] : fold) m[std::to_string(id)] = f;
  return {{"kind", to_string(kind)}, {"k", k}, {"fold", m}};
}

std::vector<int> lpt_assign(const std::vector<double>& weights, int k, std::uint64_t seed) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  std::vector<double> load(static_cast<std::size_t>(k), 0.0);
  std::vector<int> out(weights.size(), 0);
  for (std::size_t i : order) {
    const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    out[i] = static_cast<int>(f);
    load[f] += weights[i];
  }
  return out;
}

FoldAssignment stratified_folds(const std::vector<ReferencePolygon>& refs, Stratification kind, int k,
                                std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  FoldAssignment fa;
  fa.kind = kind;
  fa.k = k;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < refs.size(); ++i) by_class[refs[i].lcz].push_back(i);
  for (auto& [c, members] : by_class) {
    if (members.size() < 2)
      throw DataError("class " + lcz_name(c) + " has a single reference polygon; split singletons first");
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return refs[a].id < refs[b].id; });
    std::vector<double> w;
    for (std::size_t i : members) w.push_back(kind == Stratification::etc_count ? refs[i].weight_etc : refs[i].weight_area);
    const auto f = lpt_assign(w, k, seed + static_cast<std::uint64_t>(c));
    for (std::size_t j = 0; j < members.size(); ++j) fa.fold[refs[members[j]].id] = f[j];
  }
  return fa;
}

// ---------- labels ----------

Labeling label_etcs(const std::vector<EtcCell>& cells, const std::vector<Building>& buildings,
                    const std::vector<ReferencePolygon>& refs, bool by_overlap) {
  Labeling out;
  out.label.resize(cells.size());
  out.reference.resize(cells.size());
  if (!by_overlap) {
    std::map<std::int64_t, std::size_t> bidx;
    for (std::size_t i = 0; i < buildings.size(); ++i) bidx[buildings[i].id] = i;
    ReferenceIndex index(refs);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto it = bidx.find(cells[i].building_id);
      if (it == bidx.end()) continue;
      if (auto k = index.find(geom::centroid(buildings[it->second].footprint))) {
        out.reference[i] = *k;
        out.label[i] = refs[*k].lcz;
      }
    }
    return out;
  }
  using Entry = std::pair<Box, std::size_t>;
  std::vector<Entry> e;
  for (std::size_t i = 0; i < refs.size(); ++i) e.push_back({geom::envelope(refs[i].polygon), i});
  bgi::rtree<Entry, bgi::quadratic<16>> tree(e.begin(), e.end());
  parallel_for(cells.size(), [&](std::size_t i) {
    std::vector<Entry> hits;
    tree.query(bgi::intersects(geom::envelope(cells[i].polygon)), std::back_inserter(hits));
    double best = 0.0;
    for (const auto& [box, k] : hits) {
      MultiPolygon inter;
      bg::intersection(cells[i].polygon, refs[k].polygon, inter);
      const double a = bg::area(inter);
      if (a > best || (a == best && a > 0 && out.label[i] && refs[k].lcz < *out.label[i])) {
        best = a;
        out.label[i] = refs[k].lcz;
        out.reference[i] = k;
      }
    }
  });
  return out;
}

void count_etcs(std::vector<ReferencePolygon>& refs, const Labeling& labels) {
  for (auto& r : refs) r.weight_etc = 0.0;
  for (const auto& k : labels.reference)
    if (k) refs[*k].weight_etc += 1.0;
}

// ---------- scores ----------

nlohmann::json Scores::to_json() const {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json pc = nlohmann::json::object();
  for (const auto& [c, v] : f1_class) pc[lcz_name(c)] = {{"f1", v}, {"support", support.at(c)}};
  return {{"n", n}, {"oa", oa}, {"f1", num(f1)}, {"f1u", num(f1u)}, {"f1n", num(f1n)}, {"per_class", pc}};
}

Scores scores(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.empty()) throw DataError("cannot score empty label vectors");
  if (truth.size() != pred.size()) throw DataError("label vectors differ in length");
  Scores s;
  s.n = truth.size();
  std::set<int> cs(truth.begin(), truth.end());
  cs.insert(pred.begin(), pred.end());
  s.classes.assign(cs.begin(), cs.end());
  const std::size_t k = s.classes.size();
  auto idx = [&](int c) { return static_cast<std::size_t>(std::lower_bound(s.classes.begin(), s.classes.end(), c) - s.classes.begin()); };
  s.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++s.confusion[idx(truth[i])][idx(pred[i])];
  std::int64_t correct = 0;
  double wu = 0, su = 0, wn = 0, sn = 0, wa = 0, sa = 0;
  for (std::size_t c = 0; c < k; ++c) {
    correct += s.confusion[c][c];
    std::int64_t sup = 0, predicted = 0;
    for (std::size_t j = 0; j < k; ++j) {
      sup += s.confusion[c][j];
      predicted += s.confusion[j][c];
    }
    const double tp = static_cast<double>(s.confusion[c][c]);
    const double p = predicted ? tp / static_cast<double>(predicted) : 0.0;
    const double r = sup ? tp / static_cast<double>(sup) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    const int cls = s.classes[c];
    s.f1_class[cls] = f;
    s.support[cls] = sup;
    const double ds = static_cast<double>(sup);
    wa += ds * f, sa += ds;
    if (is_urban(cls)) wu += ds * f, su += ds;
    if (is_natural(cls)) wn += ds * f, sn += ds;
  }
  s.oa = static_cast<double>(correct) / static_cast<double>(s.n);
  s.f1 = sa > 0 ? wa / sa : kMissing;
  s.f1u = su > 0 ? wu / su : kMissing;
  s.f1n = sn > 0 ? wn / sn : kMissing;
  return s;
}

EvaluationReport aggregate_report(const std::vector<Scores>& folds) {
  if (folds.empty()) throw DataError("no folds to aggregate");
  EvaluationReport r;
  r.folds = folds;
  auto summarize = [&](const char* name, double Scores::*m) {
    double sum = 0;
    int n = 0;
    Spread sp{-INFINITY, INFINITY};
    for (const auto& f : folds) {
      const double v = f.*m;
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
      sp.best = std::max(sp.best, v);
      sp.worst = std::min(sp.worst, v);
    }
    if (n) r.spread[name] = sp;
    return n ? sum / n : kMissing;
  };
  r.oa = summarize("oa", &Scores::oa);
  r.f1 = summarize("f1", &Scores::f1);
  r.f1u = summarize("f1u", &Scores::f1u);
  r.f1n = summarize("f1n", &Scores::f1n);
  std::set<int> cs;
  for (const auto& f : folds) cs.insert(f.classes.begin(), f.classes.end());
  r.classes.assign(cs.begin(), cs.end());
  const std::size_t k = r.classes.size();
  r.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  auto idx = [&](int c) { return static_cast<std::size_t>(std::lower_bound(r.classes.begin(), r.classes.end(), c) - r.classes.begin()); };
  std::map<int, std::pair<double, int>> pc;
  for (const auto& f : folds) {
    for (std::size_t a = 0; a < f.classes.size(); ++a)
      for (std::size_t b = 0; b < f.classes.size(); ++b) r.confusion[idx(f.classes[a])][idx(f.classes[b])] += f.confusion[a][b];
    for (const auto& [c, v] : f.f1_class)
      if (f.support.at(c) > 0) {
        pc[c].first += v;
        ++pc[c].second;
      }
  }
  for (const auto& [c, acc] : pc) r.f1_class[c] = acc.first / acc.second;
  return r;
}

nlohmann::json EvaluationReport::to_json() const {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json j;
  j["oa"] = num(oa);
  j["f1"] = num(f1);
  j["f1u"] = num(f1u);
  j["f1n"] = num(f1n);
  for (const auto& [m, s] : spread) j["spread"][m] = {{"best", s.best}, {"worst", s.worst}, {"range", s.best - s.worst}};
  j["folds"] = nlohmann::json::array();
  for (const auto& f : folds) j["folds"].push_back(f.to_json());
  std::vector<std::string> names;
  for (int c : classes) names.push_back(lcz_name(c));
  j["classes"] = names;
  j["confusion"] = confusion;
  nlohmann::json pc = nlohmann::json::object();
  for (const auto& [c, v] : f1_class) pc[lcz_name(c)] = v;
  j["f1_class"] = pc;
  return j;
}

void EvaluationReport::write_confusion_csv(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "true\\pred";
  for (int c : classes) f << ',' << lcz_name(c);
  f << '\n';
  for (std::size_t a = 0; a < classes.size(); ++a) {
    f << lcz_name(classes[a]);
    for (std::size_t b = 0; b < classes.size(); ++b) f << ',' << confusion[a][b];
    f << '\n';
  }
}

// ---------- grid + maps ----------

std::vector<int> s1_to_grid(const std::vector<EtcCell>& cells, const std::vector<std::optional<int>>& labels,
                            const Grid100& grid) {
  using Entry = std::pair<Box, std::size_t>;
  std::vector<Entry> e;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (labels[i]) e.push_back({geom::envelope(cells[i].polygon), i});
  bgi::rtree<Entry, bgi::quadratic<16>> tree(e.begin(), e.end());
  std::vector<int> out(grid.size(), 0);
  parallel_for(grid.size(), [&](std::size_t id) {
    const Box box = grid.cell_box(id);
    std::vector<Entry> hits;
    tree.query(bgi::intersects(box), std::back_inserter(hits));
    std::map<int, double> area;
    for (const auto& [b, i] : hits) {
      MultiPolygon inter;
      bg::intersection(cells[i].polygon, box, inter);
      const double a = bg::area(inter);
      if (a > 0) area[*labels[i]] += a;
    }
    int best = 0;
    double ba = 0;
    for (const auto& [c, a] : area)
      if (a > ba) best = c, ba = a;
    out[id] = best;
  });
  return out;
}

nlohmann::json legend_json(const std::vector<int>& present) {
  std::set<int> cs(present.begin(), present.end());
  nlohmann::json j = nlohmann::json::array();
  for (int c : cs)
    if (is_lcz(c)) j.push_back({{"code", c}, {"name", "LCZ " + lcz_name(c)}, {"color", lcz_hex(c)}});
  return j;
}

namespace {

void write_png_labels(const std::filesystem::path& path, const std::vector<int>& labels, std::size_t w, std::size_t h) {
  std::vector<std::uint8_t> rgb(w * h * 3, 255);
  for (std::size_t i = 0; i < w * h; ++i)
    if (is_lcz(labels[i])) {
      const auto c = lcz_color(labels[i]);
      std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }
  write_png(path, w, h, rgb);
}

void write_legend(const std::filesystem::path& path, const std::vector<int>& present, const nlohmann::json& meta) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  nlohmann::json j = meta;
  j["classes"] = legend_json(present);
  f << j.dump(2) << '\n';
}

}  // namespace

MapFiles emit_grid_map(const std::vector<int>& labels, const Grid100& grid, const std::filesystem::path& stem,
                       const nlohmann::json& meta) {
  MapFiles m{stem.string() + ".tif", stem.string() + ".png", stem.string() + ".legend.json"};
  Raster r;
  r.grid = grid.pixels;
  r.grid.pixel = grid.pixels.pixel * static_cast<double>(grid.block);
  r.grid.width = grid.ncols;
  r.grid.height = grid.nrows;
  std::vector<double> v(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) v[i] = labels[i] > 0 ? labels[i] : kMissing;
  r.add_band("lcz", v);
  write_geotiff(m.data, r, PixelType::uint8, meta);
  write_png_labels(m.png, labels, grid.ncols, grid.nrows);
  write_legend(m.legend, labels, meta);
  return m;
}

MapFiles emit_cell_map(const std::vector<EtcCell>& cells, const std::vector<std::optional<int>>& labels,
                       const io::Crs& crs, const GridSpec& render, const std::filesystem::path& stem,
                       const nlohmann::json& meta) {
  MapFiles m{stem.string() + ".geojson", stem.string() + ".png", stem.string() + ".legend.json"};
  io::FeatureCollection fc;
  fc.crs = crs;
  std::vector<int> present;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    io::Feature f;
    f.id = cells[i].id;
    f.geometry = cells[i].polygon;
    f.properties = {{"building_id", cells[i].building_id}};
    if (labels[i]) {
      f.properties["lcz"] = *labels[i];
      f.properties["lcz_name"] = lcz_name(*labels[i]);
      present.push_back(*labels[i]);
    } else {
      f.properties["lcz"] = nullptr;
    }
    fc.features.push_back(std::move(f));
  }
  io::write_layer(m.data, fc, "lcz_cells");
  const auto idx = cell_index_raster(cells, render);
  std::vector<int> px(idx.size(), 0);
  for (std::size_t p = 0; p < idx.size(); ++p)
    if (idx[p] >= 0 && labels[static_cast<std::size_t>(idx[p])]) px[p] = *labels[static_cast<std::size_t>(idx[p])];
  write_png_labels(m.png, px, render.width, render.height);
  write_legend(m.legend, present, meta);
  return m;
}

}  // namespace morpholcz
