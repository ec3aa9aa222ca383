// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "morpholcz/config.hpp"
#include "morpholcz/ingest.hpp"
#include "morpholcz/lcz.hpp"
#include "morpholcz/raster.hpp"

namespace morpholcz {

enum class Template { compact_lowrise, open_lowrise, large_lowrise, sparse };
std::string to_string(Template t);
Template template_from_string(const std::string& s);
/// LCZ class a template stands for: 3, 6, 8 and 9.
int template_class(Template t);

/// One rectangular district. Zero-valued parameters take the template
/// defaults.
struct District {
  Template kind = Template::open_lowrise;
  geom::Box extent;
  double footprint = 0.0;   // mean footprint side, m
  double gap = 0.0;         // clear distance between neighbouring footprints, m
  double pitch = 0.0;       // street grid pitch, m
  double occupancy = 0.0;    // share of lots that receive a building
  double built_share = 0.0;  // share of street blocks that are built at all; the rest stay natural
  double reference_tile = 200.0;  // side of the reference polygons the district is cut into, m
};

struct SynthCity {
  std::vector<Building> buildings;
  StreetNetwork streets;
  geom::Polygon study_area;
  std::vector<ReferencePolygon> reference;
  Raster imagery;  // 10 bands at 10 m
  int epsg = 32633;
};

/// Deterministic synthetic site. Throws ConfigError when districts overlap
/// or are not aligned to the 100 m grid.
SynthCity synth_city(const std::vector<District>& districts, std::uint64_t seed);

/// Four districts on a 1200 m square: compact low-rise over large low-rise
/// on the left, a wide open low-rise district over a smaller sparse one on
/// the right.
std::vector<District> default_districts();

/// Writes the site's layers, the imagery and a `site.ini` tuned for desk
/// scale; returns the config path.
std::filesystem::path write_synth_site(const SynthCity& city, const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace morpholcz
