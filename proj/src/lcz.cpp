// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/lcz.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <cstdio>

#include "morpholcz/error.hpp"

namespace morpholcz {

namespace {
constexpr std::array<std::array<std::uint8_t, 3>, kLczCount> kPalette = {{
    {0x8c, 0x00, 0x00}, {0xd1, 0x00, 0x00}, {0xff, 0x00, 0x00}, {0xbf, 0x4d, 0x00}, {0xff, 0x66, 0x00},
    {0xff, 0x99, 0x55}, {0xfa, 0xee, 0x05}, {0xbc, 0xbc, 0xbc}, {0xff, 0xcc, 0xaa}, {0x55, 0x55, 0x55},
    {0x00, 0x6a, 0x00}, {0x00, 0xaa, 0x00}, {0x64, 0x85, 0x25}, {0xb9, 0xdb, 0x79}, {0x00, 0x00, 0x00},
    {0xfb, 0xf7, 0xae}, {0x6a, 0x6a, 0xff},
}};
}  // namespace

std::string lcz_name(int c) {
  if (!is_lcz(c)) throw DataError("not an LCZ class: " + std::to_string(c));
  return is_urban(c) ? std::to_string(c) : std::string(1, static_cast<char>('A' + (c - 11)));
}

int parse_lcz(const nlohmann::json& v) {
  if (v.is_number_integer()) {
    const int c = v.get<int>();
    if (is_lcz(c)) return c;
    throw DataError("LCZ class out of range: " + v.dump());
  }
  if (!v.is_string()) throw DataError("unreadable LCZ class: " + v.dump());
  std::string s = v.get<std::string>();
  if (s.rfind("LCZ", 0) == 0 || s.rfind("lcz", 0) == 0) s = s.substr(3);
  while (!s.empty() && (s.front() == ' ' || s.front() == '-' || s.front() == '_')) s.erase(s.begin());
  if (s.size() == 1 && std::toupper(static_cast<unsigned char>(s[0])) >= 'A' &&
      std::toupper(static_cast<unsigned char>(s[0])) <= 'G')
    return 11 + (std::toupper(static_cast<unsigned char>(s[0])) - 'A');
  try {
    std::size_t used = 0;
    const int c = std::stoi(s, &used);
    if (used == s.size() && is_lcz(c)) return c;
  } catch (const std::exception&) {
  }
  throw DataError("unreadable LCZ class: " + v.dump());
}

std::array<std::uint8_t, 3> lcz_color(int c) {
  if (!is_lcz(c)) throw DataError("not an LCZ class: " + std::to_string(c));
  return kPalette[static_cast<std::size_t>(c - 1)];
}

std::string lcz_hex(int c) {
  const auto rgb = lcz_color(c);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::vector<ReferencePolygon> reference_from(const io::FeatureCollection& fc, const std::string& field) {
  std::vector<ReferencePolygon> out;
  for (const auto& f : fc.features) {
    if (!f.properties.contains(field)) throw DataError("reference feature " + std::to_string(f.id) + " lacks '" + field + "'");
    const int c = parse_lcz(f.properties[field]);
    const auto parts = io::polygon_parts(f.geometry);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      ReferencePolygon r;
      r.id = parts.size() == 1 ? f.id : f.id * 1000 + static_cast<std::int64_t>(k);
      r.polygon = parts[k];
      r.lcz = c;
      r.weight_area = geom::bg::area(parts[k]) / 10000.0;
      out.push_back(std::move(r));
    }
  }
  return out;
}

struct ReferenceIndex::Impl {
  using Entry = std::pair<geom::Box, std::size_t>;
  using Tree = boost::geometry::index::rtree<Entry, boost::geometry::index::quadratic<16>>;
  std::vector<ReferencePolygon> refs;
  Tree tree;
};

ReferenceIndex::ReferenceIndex(const std::vector<ReferencePolygon>& refs) {
  std::vector<Impl::Entry> e;
  for (std::size_t i = 0; i < refs.size(); ++i) e.push_back({geom::envelope(refs[i].polygon), i});
  impl_ = new Impl{refs, Impl::Tree(e.begin(), e.end())};
}

ReferenceIndex::~ReferenceIndex() { delete impl_; }

std::optional<std::size_t> ReferenceIndex::find(const geom::Point& p) const {
  std::vector<Impl::Entry> hits;
  impl_->tree.query(boost::geometry::index::intersects(p), std::back_inserter(hits));
  std::optional<std::size_t> best;
  for (const auto& [box, i] : hits) {
    if (!geom::bg::covered_by(p, impl_->refs[i].polygon)) continue;
    if (!best || impl_->refs[i].lcz < impl_->refs[*best].lcz ||
        (impl_->refs[i].lcz == impl_->refs[*best].lcz && i < *best))
      best = i;
  }
  return best;
}

io::FeatureCollection reference_to(const std::vector<ReferencePolygon>& refs, const io::Crs& crs) {
  io::FeatureCollection fc;
  fc.crs = crs;
  for (const auto& r : refs) {
    io::Feature f;
    f.id = r.id;
    f.geometry = r.polygon;
    f.properties = {{"lcz", r.lcz}, {"lcz_name", lcz_name(r.lcz)}, {"weight_etc", r.weight_etc}, {"weight_area", r.weight_area}};
    fc.features.push_back(std::move(f));
  }
  return fc;
}

}  // namespace morpholcz
