// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/table.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "morpholcz/error.hpp"

namespace morpholcz {

std::size_t Table::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == name) return c;
  throw DataError("column not found: " + name);
}

std::size_t Table::row_of(std::int64_t id) const {
  for (std::size_t r = 0; r < ids.size(); ++r)
    if (ids[r] == id) return r;
  throw DataError("row id not found: " + std::to_string(id));
}

std::vector<double> Table::column_values(std::size_t c) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
  return out;
}

Table Table::select(const std::vector<std::size_t>& cols) const {
  std::vector<std::string> names;
  for (auto c : cols) names.push_back(columns.at(c));
  Table t(ids, names);
  t.id_name = id_name;
  t.meta = meta;
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t k = 0; k < cols.size(); ++k) t.at(r, k) = at(r, cols[k]);
  return t;
}

Table hconcat(const Table& a, const Table& b) {
  if (a.ids != b.ids) throw DataError("hconcat: row ids differ");
  std::vector<std::string> names = a.columns;
  names.insert(names.end(), b.columns.begin(), b.columns.end());
  Table t(a.ids, names);
  t.id_name = a.id_name;
  t.meta = a.meta;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t.at(r, c) = a.at(r, c);
    for (std::size_t c = 0; c < b.cols(); ++c) t.at(r, a.cols() + c) = b.at(r, c);
  }
  return t;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv(const std::filesystem::path& path, const Table& t) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [k, v] : t.meta) out << "# " << k << '=' << v << '\n';
  out << t.id_name;
  for (const auto& c : t.columns) out << ',' << c;
  out << '\n';
  std::string line;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    line = std::to_string(t.ids[r]);
    for (std::size_t c = 0; c < t.cols(); ++c) {
      line += ',';
      line += format_double(t.at(r, c));
    }
    line += '\n';
    out << line;
  }
}

namespace {

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

double parse_double(std::string_view f, const std::filesystem::path& path) {
  while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.remove_suffix(1);
  while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
  if (f.empty() || f == "nan" || f == "NaN" || f == "NA") return kMissing;
  double v = 0;
  auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc()) throw DataError("bad number '" + std::string(f) + "' in " + path.string());
  return v;
}

}  // namespace

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::size_t ks = line.find_first_not_of("# ");
        t.meta[line.substr(ks, eq - ks)] = line.substr(eq + 1);
      }
      continue;
    }
    auto fields = split(line);
    if (!header) {
      t.id_name = std::string(fields[0]);
      for (std::size_t i = 1; i < fields.size(); ++i) t.columns.emplace_back(fields[i]);
      header = true;
      continue;
    }
    if (fields.size() != t.columns.size() + 1)
      throw DataError("ragged row in " + path.string() + ": " + line.substr(0, 40));
    std::int64_t id = 0;
    auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (res.ec != std::errc()) throw DataError("bad row id in " + path.string());
    t.ids.push_back(id);
    for (std::size_t i = 1; i < fields.size(); ++i) t.values.push_back(parse_double(fields[i], path));
  }
  if (!header) throw DataError("empty table " + path.string());
  return t;
}

}  // namespace morpholcz
