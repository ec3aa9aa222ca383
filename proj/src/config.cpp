// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "morpholcz/error.hpp"
#include "morpholcz/hash.hpp"

namespace morpholcz {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
std::string join_num(const std::vector<T>& v) {
  std::vector<std::string> s;
  for (T x : v) s.push_back(format_double(static_cast<double>(x)));
  return join(s);
}

std::string depth_str(int d) { return d < 0 ? "none" : std::to_string(d); }

// Flat list of (section.key, value) pairs; the single source of key names.
std::vector<std::pair<std::string, std::string>> entries(const SiteConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  auto p = [](const fs::path& x) { return x.string(); };
  auto d = [](double v) { return format_double(v); };
  std::vector<std::string> depths, weights;
  for (int x : c.forest.depth_grid) depths.push_back(depth_str(x));
  for (auto w : c.forest.weightings) weights.push_back(to_string(w));
  const auto& i = c.ingest;
  return {
      {"site.name", c.name},
      {"site.seed", std::to_string(c.seed)},
      {"paths.buildings", p(c.paths.buildings)},
      {"paths.streets", p(c.paths.streets)},
      {"paths.waterlines", p(c.paths.waterlines)},
      {"paths.waterbodies", p(c.paths.waterbodies)},
      {"paths.study_area", p(c.paths.study_area)},
      {"paths.reference", p(c.paths.reference)},
      {"paths.imagery", p(c.paths.imagery)},
      {"paths.embeddings", p(c.paths.embeddings)},
      {"paths.output", p(c.paths.output)},
      {"ingest.max_building_area", d(i.max_building_area)},
      {"ingest.simplify_tol", d(i.simplify_tol)},
      {"ingest.merge_overlap_frac", d(i.merge_overlap_frac)},
      {"ingest.small_building_area", d(i.small_building_area)},
      {"ingest.snap_tol", d(i.snap_tol)},
      {"ingest.max_tunnel_length", d(i.max_tunnel_length)},
      {"ingest.skip_simplify", b(i.skip_simplify)},
      {"tessellation.segment", d(c.tessellation.segment_len)},
      {"tessellation.shrink", d(c.tessellation.shrink)},
      {"morphometrics.tick_length", d(c.morphometrics.profile.tick_len)},
      {"morphometrics.tick_spacing", d(c.morphometrics.profile.tick_spacing)},
      {"context.steps", std::to_string(c.context.steps)},
      {"context.percentiles", join_num(c.context.percentiles)},
      {"context.include_focal", b(c.context.include_focal)},
      {"reference.class_field", c.class_field},
      {"reference.label_by_overlap", b(c.label_by_overlap)},
      {"evaluation.folds", std::to_string(c.folds)},
      {"forest.n_trees", std::to_string(c.forest.n_trees)},
      {"forest.depth_grid", join(depths)},
      {"forest.feature_grid", join_num(c.forest.feature_grid)},
      {"forest.max_gap", d(c.forest.max_gap)},
      {"forest.weightings", join(weights)},
      {"forest.top_k", std::to_string(c.forest.top_k)},
      {"fusion.patch_size_m", d(c.patch.size_m)},
      {"fusion.patch_step_m", d(c.patch.step_m)},
      {"fusion.cell_m", d(c.cell_m)},
      {"schemes.s1", b(c.s1)},
      {"schemes.s3", b(c.s3)},
      {"schemes.s4", b(c.s4)},
  };
}

double to_num(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_num(key, v);
  if (x != std::floor(x)) throw ConfigError(key + ": not an integer: '" + v + "'");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

void apply(SiteConfig& c, const std::string& key, const std::string& v, const fs::path& base) {
  auto path = [&](fs::path& dst) { dst = v.empty() ? fs::path() : fs::path(v).is_absolute() ? fs::path(v) : base / v; };
  auto& i = c.ingest;
  if (key == "site.name") c.name = v;
  else if (key == "site.seed") c.seed = static_cast<std::uint64_t>(to_num(key, v));
  else if (key == "paths.buildings") path(c.paths.buildings);
  else if (key == "paths.streets") path(c.paths.streets);
  else if (key == "paths.waterlines") path(c.paths.waterlines);
  else if (key == "paths.waterbodies") path(c.paths.waterbodies);
  else if (key == "paths.study_area") path(c.paths.study_area);
  else if (key == "paths.reference") path(c.paths.reference);
  else if (key == "paths.imagery") path(c.paths.imagery);
  else if (key == "paths.embeddings") path(c.paths.embeddings);
  else if (key == "paths.output") path(c.paths.output);
  else if (key == "ingest.max_building_area") i.max_building_area = to_num(key, v);
  else if (key == "ingest.simplify_tol") i.simplify_tol = to_num(key, v);
  else if (key == "ingest.merge_overlap_frac") i.merge_overlap_frac = to_num(key, v);
  else if (key == "ingest.small_building_area") i.small_building_area = to_num(key, v);
  else if (key == "ingest.snap_tol") i.snap_tol = to_num(key, v);
  else if (key == "ingest.max_tunnel_length") i.max_tunnel_length = to_num(key, v);
  else if (key == "ingest.skip_simplify") i.skip_simplify = to_bool(key, v);
  else if (key == "tessellation.segment") c.tessellation.segment_len = to_num(key, v);
  else if (key == "tessellation.shrink") c.tessellation.shrink = to_num(key, v);
  else if (key == "morphometrics.tick_length") c.morphometrics.profile.tick_len = to_num(key, v);
  else if (key == "morphometrics.tick_spacing") c.morphometrics.profile.tick_spacing = to_num(key, v);
  else if (key == "context.steps") c.context.steps = to_int(key, v);
  else if (key == "context.percentiles") {
    c.context.percentiles.clear();
    for (const auto& s : split(v)) c.context.percentiles.push_back(to_num(key, s));
  } else if (key == "context.include_focal") c.context.include_focal = to_bool(key, v);
  else if (key == "reference.class_field") c.class_field = v;
  else if (key == "reference.label_by_overlap") c.label_by_overlap = to_bool(key, v);
  else if (key == "evaluation.folds") c.folds = to_int(key, v);
  else if (key == "forest.n_trees") c.forest.n_trees = to_int(key, v);
  else if (key == "forest.depth_grid") {
    c.forest.depth_grid.clear();
    for (const auto& s : split(v)) c.forest.depth_grid.push_back(s == "none" ? -1 : to_int(key, s));
  } else if (key == "forest.feature_grid") {
    c.forest.feature_grid.clear();
    for (const auto& s : split(v)) c.forest.feature_grid.push_back(to_int(key, s));
  } else if (key == "forest.max_gap") c.forest.max_gap = to_num(key, v);
  else if (key == "forest.weightings") {
    c.forest.weightings.clear();
    try {
      for (const auto& s : split(v)) c.forest.weightings.push_back(weighting_from_string(s));
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
  } else if (key == "forest.top_k") c.forest.top_k = static_cast<std::size_t>(to_int(key, v));
  else if (key == "fusion.patch_size_m") c.patch.size_m = to_num(key, v);
  else if (key == "fusion.patch_step_m") c.patch.step_m = to_num(key, v);
  else if (key == "fusion.cell_m") c.cell_m = to_num(key, v);
  else if (key == "schemes.s1") c.s1 = to_bool(key, v);
  else if (key == "schemes.s3") c.s3 = to_bool(key, v);
  else if (key == "schemes.s4") c.s4 = to_bool(key, v);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

void validate(const SiteConfig& c) {
  if (c.folds < 2) throw ConfigError("evaluation.folds must be at least 2");
  if (c.forest.n_trees < 1) throw ConfigError("forest.n_trees must be positive");
  if (c.forest.depth_grid.empty()) throw ConfigError("forest.depth_grid is empty");
  if (c.forest.weightings.empty()) throw ConfigError("forest.weightings is empty");
  if (c.context.steps < 0) throw ConfigError("context.steps must be non-negative");
  if (c.context.percentiles.empty()) throw ConfigError("context.percentiles is empty");
  for (double p : c.context.percentiles)
    if (p < 0 || p > 100) throw ConfigError("context.percentiles must lie in [0, 100]");
  if (!(c.tessellation.segment_len > 0)) throw ConfigError("tessellation.segment must be positive");
  if (!(c.patch.size_m > 0 && c.patch.step_m > 0 && c.cell_m > 0)) throw ConfigError("fusion sizes must be positive");
  if (!(c.forest.max_gap > 0 && c.forest.max_gap < 1)) throw ConfigError("forest.max_gap must lie in (0, 1)");
}

}  // namespace

nlohmann::json SiteConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : entries(*this)) {
    const auto dot = k.find('.');
    j[k.substr(0, dot)][k.substr(dot + 1)] = v;
  }
  return j;
}

std::string SiteConfig::hash() const {
  auto j = to_json();
  j.erase("paths");
  return sha256_hex(j.dump());
}

void SiteConfig::save(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  std::string section;
  for (const auto& [k, v] : entries(*this)) {
    const auto dot = k.find('.');
    if (k.substr(0, dot) != section) {
      section = k.substr(0, dot);
      f << (f.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
    }
    f << k.substr(dot + 1) << " = " << v << '\n';
  }
}

SiteConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  SiteConfig c;
  const fs::path base = fs::absolute(path).parent_path();
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& [key, value] : keys) apply(c, section + "." + key, value.get_value<std::string>(), base);
  }
  if (c.paths.output.empty()) c.paths.output = base / "out";
  validate(c);
  return c;
}

void check_inputs(const SiteConfig& c) {
  const std::vector<std::pair<const char*, fs::path>> required = {
      {"paths.buildings", c.paths.buildings}, {"paths.streets", c.paths.streets},
      {"paths.study_area", c.paths.study_area}, {"paths.reference", c.paths.reference}};
  for (const auto& [k, p] : required) {
    if (p.empty()) throw ConfigError(std::string(k) + " is required");
    if (!fs::exists(p)) throw ConfigError(std::string(k) + " does not exist: " + p.string());
  }
  const std::vector<std::pair<const char*, fs::path>> optional = {{"paths.waterlines", c.paths.waterlines},
                                                                  {"paths.waterbodies", c.paths.waterbodies},
                                                                  {"paths.imagery", c.paths.imagery},
                                                                  {"paths.embeddings", c.paths.embeddings}};
  for (const auto& [k, p] : optional)
    if (!p.empty() && !fs::exists(p)) throw ConfigError(std::string(k) + " does not exist: " + p.string());
  if (c.s3 && c.paths.imagery.empty()) throw ConfigError("schemes.s3 needs paths.imagery");
}

}  // namespace morpholcz
