// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace morpholcz {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool missing(double v) { return std::isnan(v); }

/// Dense row-major matrix keyed by integer row ids. Missing cells are NaN
/// in memory and empty fields on disk.
struct Table {
  std::string id_name = "id";
  std::vector<std::int64_t> ids;
  std::vector<std::string> columns;
  std::vector<double> values;
  // Written as leading "# key=value" lines; used for config hash and seed.
  std::map<std::string, std::string> meta;

  Table() = default;
  Table(std::vector<std::int64_t> row_ids, std::vector<std::string> cols)
      : ids(std::move(row_ids)), columns(std::move(cols)), values(ids.size() * columns.size(), kMissing) {}

  std::size_t rows() const { return ids.size(); }
  std::size_t cols() const { return columns.size(); }
  double& at(std::size_t r, std::size_t c) { return values[r * columns.size() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * columns.size() + c]; }
  const double* row(std::size_t r) const { return values.data() + r * columns.size(); }

  /// Index of a column by name; throws DataError if absent.
  std::size_t column(const std::string& name) const;
  /// Row index of an id; throws DataError if absent.
  std::size_t row_of(std::int64_t id) const;

  std::vector<double> column_values(std::size_t c) const;
  /// Keep the listed columns in the given order.
  Table select(const std::vector<std::size_t>& cols) const;
};

/// Columns of `b` appended to `a`; row ids must match exactly.
Table hconcat(const Table& a, const Table& b);

void write_csv(const std::filesystem::path& path, const Table& t);
Table read_csv(const std::filesystem::path& path);

/// Shortest decimal form that round-trips a double; "" for NaN.
std::string format_double(double v);

}  // namespace morpholcz
