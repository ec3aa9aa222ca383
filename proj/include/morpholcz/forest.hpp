// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace morpholcz {

/// Row-major feature matrix with labels and fold ids. Missing values are NaN.
struct Dataset {
  std::size_t n = 0, d = 0;
  std::vector<double> X;
  std::vector<int> y;
  std::vector<std::int64_t> ids;
  std::vector<int> folds;
  std::vector<std::string> features;

  double x(std::size_t r, std::size_t c) const { return X[r * d + c]; }
  const double* row(std::size_t r) const { return X.data() + r * d; }
  /// Rows whose fold is (or is not, with `invert`) in `folds`.
  std::vector<std::size_t> rows_in(const std::vector<int>& folds, bool invert = false) const;
};

enum class Weighting { uniform, inverse_frequency };
std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);

struct ForestParams {
  int n_trees = 100;
  int max_depth = -1;  // -1: unbounded
  int max_features = 0;  // 0: all features
  Weighting weighting = Weighting::uniform;
  std::uint64_t seed = 0;
  bool bootstrap = true;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1, right = -1;
  double decrease = 0.0;     // weighted impurity decrease of this split
  std::vector<double> dist;  // leaves: normalized weighted class distribution
};

struct Tree {
  std::vector<TreeNode> nodes;
  int depth() const;
};

class ForestModel {
 public:
  std::vector<int> classes;  // ascending
  std::vector<double> class_weights;
  std::vector<double> medians;  // imputation values per feature
  std::vector<Tree> trees;
  ForestParams params;
  std::size_t n_features = 0;

  std::vector<double> proba(const double* row) const;
  int predict(const double* row) const;
  std::vector<int> predict(const Dataset& data, const std::vector<std::size_t>& rows) const;
  std::vector<int> predict(const Dataset& data) const;

  nlohmann::json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);
};

inline constexpr const char* kForestFormat = "morpholcz-forest/1";

/// Fits on `rows` of `data`. Throws DataError if the rows hold fewer than two
/// classes.
ForestModel train(const Dataset& data, const std::vector<std::size_t>& rows, const ForestParams& params);
ForestModel train_folds(const Dataset& data, const std::vector<int>& train_folds, const ForestParams& params);

double overall_accuracy(const std::vector<int>& truth, const std::vector<int>& pred);

struct TuningPoint {
  int max_depth = -1;
  int max_features = 0;
  double train_oa = 0.0, test_oa = 0.0, gap = 0.0;
};

struct TuningReport {
  std::vector<TuningPoint> grid;
  std::size_t chosen = 0;
  std::string rule;  // "gap<5%" or "min-gap"
  nlohmann::json to_json() const;
};

/// Index of the chosen grid point: best test OA among points with gap below
/// `max_gap`, else the smallest gap. Ties go to the smaller depth (unbounded
/// last), then fewer features.
std::size_t select_point(const std::vector<TuningPoint>& grid, double max_gap, std::string* rule = nullptr);

/// Feature counts for the fractions in the default grid: sqrt(d), log2(d),
/// 0.1 d, 0.3 d (floored, at least 1, deduplicated, ascending).
std::vector<int> feature_grid(std::size_t d);
std::vector<int> default_depth_grid();

struct Tuned {
  ForestModel model;
  TuningReport report;
};

Tuned tune(const Dataset& data, const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows,
           const ForestParams& base, const std::vector<int>& depth_grid, const std::vector<int>& feat_grid,
           double max_gap = 0.05);

struct Importance {
  std::size_t feature;
  double score;
};

/// Gini importance, normalized per tree, averaged, renormalized to sum 1.
/// Sorted by descending score, ties by feature index.
std::vector<Importance> importance(const ForestModel& model);

/// First k features of the ranking; fewer (with a warning) if d < k.
std::vector<std::size_t> top_k(const std::vector<Importance>& ranked, std::size_t k = 20);

}  // namespace morpholcz
