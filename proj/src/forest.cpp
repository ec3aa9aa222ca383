// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/forest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "morpholcz/error.hpp"
#include "morpholcz/parallel.hpp"

namespace morpholcz {

std::vector<std::size_t> Dataset::rows_in(const std::vector<int>& fs, bool invert) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < n; ++r) {
    const bool in = std::find(fs.begin(), fs.end(), folds[r]) != fs.end();
    if (in != invert) out.push_back(r);
  }
  return out;
}

std::string to_string(Weighting w) { return w == Weighting::uniform ? "uniform" : "inverse_frequency"; }

Weighting weighting_from_string(const std::string& s) {
  if (s == "uniform") return Weighting::uniform;
  if (s == "inverse_frequency") return Weighting::inverse_frequency;
  throw ConfigError("unknown weighting: " + s);
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

struct Builder {
  // Column-major imputed training values.
  const std::vector<std::vector<double>>& cols;
  const std::vector<int>& cls;  // class index per local row
  const std::vector<double>& w;  // sample weight per local row
  std::size_t k;
  int max_depth;
  std::size_t max_features;
  std::mt19937_64& rng;
  Tree tree;

  static double cost(const std::vector<double>& wc, double total) {
    if (total <= 0.0) return 0.0;
    double s = 0.0;
    for (double v : wc) s += v * v;
    return total - s / total;
  }

  int leaf(const std::vector<double>& wc, double total) {
    TreeNode n;
    n.dist.resize(k);
    for (std::size_t c = 0; c < k; ++c) n.dist[c] = wc[c] / total;
    tree.nodes.push_back(std::move(n));
    return static_cast<int>(tree.nodes.size() - 1);
  }

  int grow(std::vector<std::size_t> idx, int depth) {
    std::vector<double> wc(k, 0.0);
    double total = 0.0;
    for (std::size_t i : idx) {
      wc[static_cast<std::size_t>(cls[i])] += w[i];
      total += w[i];
    }
    const std::size_t present = static_cast<std::size_t>(std::count_if(wc.begin(), wc.end(), [](double v) { return v > 0; }));
    if (present <= 1 || idx.size() < 2 || (max_depth >= 0 && depth >= max_depth)) return leaf(wc, total);

    const std::size_t d = cols.size();
    std::vector<std::size_t> feats(d);
    std::iota(feats.begin(), feats.end(), 0);
    const std::size_t m = std::min(max_features, d);
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(feats[i], feats[pick(rng)]);
    }
    feats.resize(m);
    std::sort(feats.begin(), feats.end());

    // Improvements smaller than `eps` count as ties so that the first
    // candidate wins regardless of summation order.
    const double eps = 1e-12 * total;
    const double parent = cost(wc, total);
    double best_cost = parent;
    int best_f = -1;
    double best_t = 0.0;
    std::vector<std::pair<double, std::size_t>> vals(idx.size());
    std::vector<double> left(k), right(k);
    for (std::size_t f : feats) {
      for (std::size_t j = 0; j < idx.size(); ++j) vals[j] = {cols[f][idx[j]], idx[j]};
      std::sort(vals.begin(), vals.end());
      if (vals.front().first == vals.back().first) continue;
      std::fill(left.begin(), left.end(), 0.0);
      double wl = 0.0;
      for (std::size_t j = 0; j + 1 < vals.size(); ++j) {
        const std::size_t i = vals[j].second;
        left[static_cast<std::size_t>(cls[i])] += w[i];
        wl += w[i];
        if (vals[j].first == vals[j + 1].first) continue;
        for (std::size_t c = 0; c < k; ++c) right[c] = wc[c] - left[c];
        const double c2 = cost(left, wl) + cost(right, total - wl);
        if (c2 < best_cost - eps) {
          best_cost = c2;
          best_f = static_cast<int>(f);
          double t = 0.5 * (vals[j].first + vals[j + 1].first);
          if (!(t < vals[j + 1].first)) t = vals[j].first;
          best_t = t;
        }
      }
    }
    if (best_f < 0) return leaf(wc, total);

    std::vector<std::size_t> li, ri;
    for (std::size_t i : idx) (cols[static_cast<std::size_t>(best_f)][i] <= best_t ? li : ri).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(self)].feature = best_f;
    tree.nodes[static_cast<std::size_t>(self)].threshold = best_t;
    tree.nodes[static_cast<std::size_t>(self)].decrease = parent - best_cost;
    const int l = grow(std::move(li), depth + 1);
    const int r = grow(std::move(ri), depth + 1);
    tree.nodes[static_cast<std::size_t>(self)].left = l;
    tree.nodes[static_cast<std::size_t>(self)].right = r;
    return self;
  }
};

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

ForestModel train(const Dataset& data, const std::vector<std::size_t>& rows, const ForestParams& params) {
  ForestModel m;
  m.params = params;
  m.n_features = data.d;
  std::map<int, std::size_t> counts;
  for (std::size_t r : rows) ++counts[data.y[r]];
  if (counts.size() < 2) throw DataError("training data must contain at least two classes");
  for (const auto& [c, n] : counts) {
    m.classes.push_back(c);
    m.class_weights.push_back(params.weighting == Weighting::uniform
                                  ? 1.0
                                  : static_cast<double>(rows.size()) / (static_cast<double>(counts.size()) * static_cast<double>(n)));
  }
  std::vector<std::vector<double>> cols(data.d, std::vector<double>(rows.size()));
  m.medians.resize(data.d);
  for (std::size_t f = 0; f < data.d; ++f) {
    std::vector<double> present;
    for (std::size_t j = 0; j < rows.size(); ++j)
      if (!std::isnan(data.x(rows[j], f))) present.push_back(data.x(rows[j], f));
    m.medians[f] = median_of(std::move(present));
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const double v = data.x(rows[j], f);
      cols[f][j] = std::isnan(v) ? m.medians[f] : v;
    }
  }
  std::vector<int> cls(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j)
    cls[j] = static_cast<int>(std::lower_bound(m.classes.begin(), m.classes.end(), data.y[rows[j]]) - m.classes.begin());

  const std::size_t mf = params.max_features > 0 ? static_cast<std::size_t>(params.max_features) : data.d;
  m.trees.resize(static_cast<std::size_t>(std::max(1, params.n_trees)));
  parallel_for(m.trees.size(), [&](std::size_t t) {
    std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    std::vector<double> w(rows.size(), 0.0);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
      for (std::size_t i = 0; i < rows.size(); ++i) w[pick(rng)] += 1.0;
    } else {
      std::fill(w.begin(), w.end(), 1.0);
    }
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < rows.size(); ++j)
      if (w[j] > 0.0) {
        w[j] *= m.class_weights[static_cast<std::size_t>(cls[j])];
        idx.push_back(j);
      }
    Builder b{cols, cls, w, m.classes.size(), params.max_depth, mf, rng, {}};
    b.grow(std::move(idx), 0);
    m.trees[t] = std::move(b.tree);
  });
  return m;
}

ForestModel train_folds(const Dataset& data, const std::vector<int>& folds, const ForestParams& params) {
  return train(data, data.rows_in(folds), params);
}

std::vector<double> ForestModel::proba(const double* row) const {
  std::vector<double> p(classes.size(), 0.0);
  for (const auto& t : trees) {
    std::size_t i = 0;
    while (t.nodes[i].feature >= 0) {
      const auto f = static_cast<std::size_t>(t.nodes[i].feature);
      const double v = std::isnan(row[f]) ? medians[f] : row[f];
      i = static_cast<std::size_t>(v <= t.nodes[i].threshold ? t.nodes[i].left : t.nodes[i].right);
    }
    for (std::size_t c = 0; c < p.size(); ++c) p[c] += t.nodes[i].dist[c];
  }
  for (double& v : p) v /= static_cast<double>(trees.size());
  return p;
}

int ForestModel::predict(const double* row) const {
  const auto p = proba(row);
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c)
    if (p[c] > p[best]) best = c;
  return classes[best];
}

std::vector<int> ForestModel::predict(const Dataset& data, const std::vector<std::size_t>& rows) const {
  if (data.d != n_features) throw DataError("feature count mismatch: model has " + std::to_string(n_features) + ", data has " + std::to_string(data.d));
  std::vector<int> out(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) { out[i] = predict(data.row(rows[i])); });
  return out;
}

std::vector<int> ForestModel::predict(const Dataset& data) const {
  std::vector<std::size_t> rows(data.n);
  std::iota(rows.begin(), rows.end(), 0);
  return predict(data, rows);
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json j;
  j["format"] = kForestFormat;
  j["classes"] = classes;
  j["class_weights"] = class_weights;
  j["medians"] = medians;
  j["n_features"] = n_features;
  j["params"] = {{"n_trees", params.n_trees},     {"max_depth", params.max_depth},
                 {"max_features", params.max_features}, {"weighting", to_string(params.weighting)},
                 {"seed", params.seed},           {"bootstrap", params.bootstrap}};
  auto& ts = j["trees"] = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json f = nlohmann::json::array(), th = f, l = f, r = f, dec = f, dist = f;
    for (const auto& n : t.nodes) {
      f.push_back(n.feature);
      th.push_back(n.threshold);
      l.push_back(n.left);
      r.push_back(n.right);
      dec.push_back(n.decrease);
      dist.push_back(n.dist);
    }
    ts.push_back({{"feature", f}, {"threshold", th}, {"left", l}, {"right", r}, {"decrease", dec}, {"dist", dist}});
  }
  return j;
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kForestFormat) throw DataError("not a forest model (expected format " + std::string(kForestFormat) + ")");
  ForestModel m;
  try {
    m.classes = j.at("classes").get<std::vector<int>>();
    m.class_weights = j.at("class_weights").get<std::vector<double>>();
    m.medians = j.at("medians").get<std::vector<double>>();
    m.n_features = j.at("n_features").get<std::size_t>();
    const auto& p = j.at("params");
    m.params.n_trees = p.at("n_trees");
    m.params.max_depth = p.at("max_depth");
    m.params.max_features = p.at("max_features");
    m.params.weighting = weighting_from_string(p.at("weighting"));
    m.params.seed = p.at("seed");
    m.params.bootstrap = p.at("bootstrap");
    for (const auto& t : j.at("trees")) {
      Tree tree;
      const auto& f = t.at("feature");
      for (std::size_t i = 0; i < f.size(); ++i) {
        TreeNode n;
        n.feature = f[i];
        n.threshold = t.at("threshold")[i];
        n.left = t.at("left")[i];
        n.right = t.at("right")[i];
        n.decrease = t.at("decrease")[i];
        n.dist = t.at("dist")[i].get<std::vector<double>>();
        tree.nodes.push_back(std::move(n));
      }
      m.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed forest model: ") + e.what());
  }
  return m;
}

double overall_accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

nlohmann::json TuningReport::to_json() const {
  nlohmann::json g = nlohmann::json::array();
  for (const auto& p : grid)
    g.push_back({{"max_depth", p.max_depth}, {"max_features", p.max_features}, {"train_oa", p.train_oa},
                 {"test_oa", p.test_oa}, {"gap", p.gap}});
  return {{"grid", g}, {"chosen", chosen}, {"rule", rule}};
}

std::size_t select_point(const std::vector<TuningPoint>& grid, double max_gap, std::string* rule) {
  if (grid.empty()) throw ConfigError("empty tuning grid");
  auto depth_key = [](int d) { return d < 0 ? std::numeric_limits<int>::max() : d; };
  auto simpler = [&](const TuningPoint& a, const TuningPoint& b) {
    if (depth_key(a.max_depth) != depth_key(b.max_depth)) return depth_key(a.max_depth) < depth_key(b.max_depth);
    return a.max_features < b.max_features;
  };
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i].gap < max_gap)) continue;
    if (!best || grid[i].test_oa > grid[*best].test_oa ||
        (grid[i].test_oa == grid[*best].test_oa && simpler(grid[i], grid[*best])))
      best = i;
  }
  if (best) {
    if (rule) *rule = "gap<5%";
    return *best;
  }
  std::size_t b = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i].gap < grid[b].gap || (grid[i].gap == grid[b].gap && simpler(grid[i], grid[b]))) b = i;
  if (rule) *rule = "min-gap";
  return b;
}

std::vector<int> feature_grid(std::size_t d) {
  const double dd = static_cast<double>(d);
  std::vector<int> g;
  for (double v : {std::sqrt(dd), std::log2(dd), 0.1 * dd, 0.3 * dd}) g.push_back(std::max(1, static_cast<int>(std::floor(v))));
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

std::vector<int> default_depth_grid() { return {4, 6, 8, 10, 12, 16, 20, -1}; }

Tuned tune(const Dataset& data, const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows,
           const ForestParams& base, const std::vector<int>& depth_grid, const std::vector<int>& feat_grid,
           double max_gap) {
  if (depth_grid.empty() || feat_grid.empty()) throw ConfigError("empty tuning grid");
  std::vector<int> ytr, yte;
  for (std::size_t r : train_rows) ytr.push_back(data.y[r]);
  for (std::size_t r : test_rows) yte.push_back(data.y[r]);
  Tuned out;
  std::vector<ForestModel> models;
  for (int depth : depth_grid)
    for (int mf : feat_grid) {
      ForestParams p = base;
      p.max_depth = depth;
      p.max_features = mf;
      auto m = train(data, train_rows, p);
      TuningPoint tp;
      tp.max_depth = depth;
      tp.max_features = mf;
      tp.train_oa = overall_accuracy(ytr, m.predict(data, train_rows));
      tp.test_oa = overall_accuracy(yte, m.predict(data, test_rows));
      tp.gap = tp.train_oa - tp.test_oa;
      out.report.grid.push_back(tp);
      models.push_back(std::move(m));
    }
  out.report.chosen = select_point(out.report.grid, max_gap, &out.report.rule);
  out.model = std::move(models[out.report.chosen]);
  return out;
}

std::vector<Importance> importance(const ForestModel& model) {
  std::vector<double> acc(model.n_features, 0.0);
  for (const auto& t : model.trees) {
    std::vector<double> per(model.n_features, 0.0);
    double total = 0.0;
    for (const auto& n : t.nodes)
      if (n.feature >= 0) {
        per[static_cast<std::size_t>(n.feature)] += n.decrease;
        total += n.decrease;
      }
    if (total <= 0.0) continue;
    for (std::size_t f = 0; f < per.size(); ++f) acc[f] += per[f] / total;
  }
  const double s = std::accumulate(acc.begin(), acc.end(), 0.0);
  std::vector<Importance> out;
  for (std::size_t f = 0; f < acc.size(); ++f) out.push_back({f, s > 0.0 ? acc[f] / s : 0.0});
  std::stable_sort(out.begin(), out.end(), [](const Importance& a, const Importance& b) { return a.score > b.score; });
  return out;
}

std::vector<std::size_t> top_k(const std::vector<Importance>& ranked, std::size_t k) {
  if (ranked.size() < k) spdlog::warn("top_k: only {} features available, {} requested", ranked.size(), k);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.push_back(ranked[i].feature);
  return out;
}

}  // namespace morpholcz
