// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morpholcz/geometry.hpp"
#include "morpholcz/io_vector.hpp"

namespace morpholcz {

/// LCZ codes: 1..10 are the built types, 11..17 stand for A..G.
inline constexpr int kLczCount = 17;
inline bool is_lcz(int c) { return c >= 1 && c <= kLczCount; }
inline bool is_urban(int c) { return c >= 1 && c <= 10; }
inline bool is_natural(int c) { return c >= 11 && c <= 17; }

/// "1".."10", "A".."G".
std::string lcz_name(int c);
/// Accepts 1..17, "1".."10", "A".."G" and an optional "LCZ" prefix.
int parse_lcz(const nlohmann::json& v);
/// Standard WUDAPT colour.
std::array<std::uint8_t, 3> lcz_color(int c);
std::string lcz_hex(int c);

struct ReferencePolygon {
  std::int64_t id = 0;
  geom::Polygon polygon;
  int lcz = 0;
  double weight_etc = 0.0;
  double weight_area = 0.0;  // hectares
};

/// Reference polygons from a layer with a class attribute; multipolygon
/// features contribute one polygon per part, keeping the feature id order.
std::vector<ReferencePolygon> reference_from(const io::FeatureCollection& fc, const std::string& field = "lcz");
/// Class and source polygon per object; empty where unlabeled.
struct Labeling {
  std::vector<std::optional<int>> label;
  std::vector<std::optional<std::size_t>> reference;
};

/// Point location over reference polygons (boundary counts as inside).
/// When polygons overlap the lowest class wins, then the earlier polygon.
class ReferenceIndex {
 public:
  explicit ReferenceIndex(const std::vector<ReferencePolygon>& refs);
  ~ReferenceIndex();
  ReferenceIndex(const ReferenceIndex&) = delete;
  ReferenceIndex& operator=(const ReferenceIndex&) = delete;
  std::optional<std::size_t> find(const geom::Point& p) const;

 private:
  struct Impl;
  Impl* impl_;
};

io::FeatureCollection reference_to(const std::vector<ReferencePolygon>& refs, const io::Crs& crs);

}  // namespace morpholcz
