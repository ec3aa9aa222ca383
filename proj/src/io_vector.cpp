// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/io_vector.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>

#include "morpholcz/error.hpp"

namespace morpholcz::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_geographic_epsg(int code) {
  switch (code) {
    case 4326:
    case 4258:
    case 4269:
    case 4283:
    case 4674:
    case 4617:
    case 4612:
    case 4490:
      return true;
    default:
      return false;
  }
}

Crs crs_from_name(const std::string& name) {
  Crs c;
  c.name = name;
  if (name.find("CRS84") != std::string::npos || name.find("CRS:84") != std::string::npos) {
    c.geographic = true;
    c.epsg = 4326;
    return c;
  }
  std::smatch m;
  static const std::regex epsg_re(R"(EPSG:{1,2}(?:[0-9.]*:)?(\d+))", std::regex::icase);
  if (std::regex_search(name, m, epsg_re)) {
    c.epsg = std::stoi(m[1]);
    c.geographic = is_geographic_epsg(*c.epsg);
  }
  if (name.rfind("GEOGCS", 0) == 0 || name.rfind("GEOGCRS", 0) == 0) c.geographic = true;
  return c;
}

// ---------- GeoJSON ----------

json coords(const Point& p) { return json::array({p.x(), p.y()}); }

template <typename Range>
json coord_list(const Range& r) {
  json a = json::array();
  for (const auto& p : r) a.push_back(coords(p));
  return a;
}

json polygon_coords(const Polygon& poly) {
  // GeoJSON prefers counter-clockwise shells; Boost stores clockwise.
  json rings = json::array();
  geom::Ring outer = poly.outer();
  std::reverse(outer.begin(), outer.end());
  rings.push_back(coord_list(outer));
  for (auto inner : poly.inners()) {
    std::reverse(inner.begin(), inner.end());
    rings.push_back(coord_list(inner));
  }
  return rings;
}

Point point_from(const json& j) {
  if (!j.is_array() || j.size() < 2) throw DataError("malformed coordinate");
  return Point(j[0].get<double>(), j[1].get<double>());
}

template <typename Out>
void points_into(const json& arr, Out& out) {
  for (const auto& c : arr) out.push_back(point_from(c));
}

Polygon polygon_from(const json& rings) {
  Polygon p;
  bool first = true;
  for (const auto& r : rings) {
    geom::Ring ring;
    points_into(r, ring);
    if (first) {
      p.outer() = std::move(ring);
      first = false;
    } else {
      p.inners().push_back(std::move(ring));
    }
  }
  geom::bg::correct(p);
  return p;
}

// ---------- WKB ----------

class WkbWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void point(const Point& p) {
    f64(p.x());
    f64(p.y());
  }
  template <typename R>
  void seq(const R& r) {
    u32(static_cast<std::uint32_t>(r.size()));
    for (const auto& p : r) point(p);
  }
  void header(std::uint32_t type) {
    u8(1);
    u32(type);
  }
  void polygon(const Polygon& p) {
    header(3);
    u32(static_cast<std::uint32_t>(1 + p.inners().size()));
    geom::Ring outer = p.outer();
    std::reverse(outer.begin(), outer.end());
    seq(outer);
    for (auto r : p.inners()) {
      std::reverse(r.begin(), r.end());
      seq(r);
    }
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class WkbReader {
 public:
  WkbReader(const std::uint8_t* d, std::size_t n) : d_(d), n_(n) {}

  Geometry read() {
    const bool le = u8() == 1;
    little_ = le;
    std::uint32_t type = u32();
    bool has_z = false, has_m = false;
    if (type & 0x80000000u) has_z = true;
    if (type & 0x40000000u) has_m = true;
    type &= 0x0FFFFFFFu;
    if (type >= 3000) {
      has_z = has_m = true;
      type -= 3000;
    } else if (type >= 2000) {
      has_m = true;
      type -= 2000;
    } else if (type >= 1000) {
      has_z = true;
      type -= 1000;
    }
    extra_ = (has_z ? 1 : 0) + (has_m ? 1 : 0);
    switch (type) {
      case 1:
        return point();
      case 2: {
        LineString l;
        seq(l);
        return l;
      }
      case 3:
        return polygon_body();
      case 4: {
        MultiPoint mp;
        const auto n = u32();
        for (std::uint32_t i = 0; i < n; ++i) mp.push_back(std::get<Point>(read()));
        return mp;
      }
      case 5: {
        MultiLineString ml;
        const auto n = u32();
        for (std::uint32_t i = 0; i < n; ++i) ml.push_back(std::get<LineString>(read()));
        return ml;
      }
      case 6: {
        MultiPolygon mp;
        const auto n = u32();
        for (std::uint32_t i = 0; i < n; ++i) mp.push_back(std::get<Polygon>(read()));
        return mp;
      }
      default:
        throw DataError("unsupported WKB geometry type " + std::to_string(type));
    }
  }

 private:
  void need(std::size_t k) const {
    if (pos_ + k > n_) throw DataError("truncated WKB");
  }
  std::uint8_t u8() {
    need(1);
    return d_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint32_t b = d_[pos_ + (little_ ? i : 3 - i)];
      v |= b << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      const std::uint64_t b = d_[pos_ + (little_ ? i : 7 - i)];
      v |= b << (8 * i);
    }
    pos_ += 8;
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  Point point() {
    const double x = f64();
    const double y = f64();
    for (int i = 0; i < extra_; ++i) f64();
    return Point(x, y);
  }
  template <typename R>
  void seq(R& r) {
    const auto n = u32();
    for (std::uint32_t i = 0; i < n; ++i) r.push_back(point());
  }
  Polygon polygon_body() {
    Polygon p;
    const auto rings = u32();
    for (std::uint32_t i = 0; i < rings; ++i) {
      geom::Ring r;
      seq(r);
      if (i == 0)
        p.outer() = std::move(r);
      else
        p.inners().push_back(std::move(r));
    }
    geom::bg::correct(p);
    return p;
  }

  const std::uint8_t* d_;
  std::size_t n_;
  std::size_t pos_ = 0;
  bool little_ = true;
  int extra_ = 0;
};

// ---------- GeoPackage ----------

struct DbCloser {
  void operator()(sqlite3* db) const { sqlite3_close(db); }
};
struct StmtFinalizer {
  void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using Db = std::unique_ptr<sqlite3, DbCloser>;
using Stmt = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

Stmt prepare(sqlite3* db, const std::string& sql) {
  sqlite3_stmt* s = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), -1, &s, nullptr) != SQLITE_OK) {
    throw DataError(std::string("sqlite: ") + sqlite3_errmsg(db) + " in: " + sql);
  }
  return Stmt(s);
}

void exec(sqlite3* db, const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw DataError("sqlite: " + msg);
  }
}

std::string quote_ident(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Geometry decode_gpkg_blob(const std::uint8_t* d, std::size_t n) {
  if (n < 8 || d[0] != 'G' || d[1] != 'P') throw DataError("not a GeoPackage geometry blob");
  const std::uint8_t flags = d[3];
  const int env = (flags >> 1) & 0x7;
  static const int env_doubles[] = {0, 4, 6, 6, 8};
  if (env > 4) throw DataError("bad GeoPackage envelope code");
  const std::size_t off = 8 + 8 * static_cast<std::size_t>(env_doubles[env]);
  if (off > n) throw DataError("truncated GeoPackage blob");
  WkbReader r(d + off, n - off);
  return r.read();
}

std::vector<std::uint8_t> encode_gpkg_blob(const Geometry& g, std::int32_t srs_id) {
  std::vector<std::uint8_t> out = {'G', 'P', 0, 0x01};  // little-endian, no envelope
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint32_t>(srs_id) >> (8 * i)));
  const auto wkb = to_wkb(g);
  out.insert(out.end(), wkb.begin(), wkb.end());
  return out;
}

FeatureCollection read_gpkg(const fs::path& path) {
  sqlite3* raw = nullptr;
  if (sqlite3_open_v2(path.string().c_str(), &raw, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
    if (raw) sqlite3_close(raw);
    throw DataError("cannot open GeoPackage " + path.string());
  }
  Db db(raw);
  auto s = prepare(db.get(),
                   "SELECT c.table_name, g.column_name, g.srs_id FROM gpkg_contents c JOIN "
                   "gpkg_geometry_columns g ON c.table_name = g.table_name WHERE c.data_type = 'features' "
                   "ORDER BY c.table_name LIMIT 1");
  if (sqlite3_step(s.get()) != SQLITE_ROW) throw DataError("GeoPackage has no feature table: " + path.string());
  const std::string table = reinterpret_cast<const char*>(sqlite3_column_text(s.get(), 0));
  const std::string gcol = reinterpret_cast<const char*>(sqlite3_column_text(s.get(), 1));
  const int srs_id = sqlite3_column_int(s.get(), 2);

  FeatureCollection fc;
  {
    auto q = prepare(db.get(),
                     "SELECT organization, organization_coordsys_id, definition FROM gpkg_spatial_ref_sys "
                     "WHERE srs_id = ?");
    sqlite3_bind_int(q.get(), 1, srs_id);
    if (sqlite3_step(q.get()) == SQLITE_ROW) {
      const auto* org = sqlite3_column_text(q.get(), 0);
      const int code = sqlite3_column_int(q.get(), 1);
      const auto* def = sqlite3_column_text(q.get(), 2);
      std::string defs = def ? reinterpret_cast<const char*>(def) : "";
      if (org && std::string(reinterpret_cast<const char*>(org)) == "EPSG" && code > 0) {
        fc.crs = crs_from_name("EPSG:" + std::to_string(code));
      }
      if (defs.rfind("GEOGCS", 0) == 0 || defs.rfind("GEOGCRS", 0) == 0) fc.crs.geographic = true;
      if (fc.crs.name.empty()) fc.crs.name = defs;
    }
  }

  auto q = prepare(db.get(), "SELECT * FROM " + quote_ident(table));
  const int ncol = sqlite3_column_count(q.get());
  std::int64_t seq = 0;
  while (sqlite3_step(q.get()) == SQLITE_ROW) {
    Feature f;
    f.id = seq++;
    bool has_geom = false;
    for (int c = 0; c < ncol; ++c) {
      const std::string name = sqlite3_column_name(q.get(), c);
      const int type = sqlite3_column_type(q.get(), c);
      if (name == gcol) {
        if (type == SQLITE_NULL) continue;
        const auto* blob = static_cast<const std::uint8_t*>(sqlite3_column_blob(q.get(), c));
        f.geometry = decode_gpkg_blob(blob, static_cast<std::size_t>(sqlite3_column_bytes(q.get(), c)));
        has_geom = true;
      } else if (name == "fid") {
        f.id = sqlite3_column_int64(q.get(), c);
      } else if (type == SQLITE_INTEGER) {
        f.properties[name] = sqlite3_column_int64(q.get(), c);
      } else if (type == SQLITE_FLOAT) {
        f.properties[name] = sqlite3_column_double(q.get(), c);
      } else if (type == SQLITE_TEXT) {
        f.properties[name] = std::string(reinterpret_cast<const char*>(sqlite3_column_text(q.get(), c)));
      }
    }
    if (has_geom) fc.features.push_back(std::move(f));
  }
  return fc;
}

void write_gpkg(const fs::path& path, const FeatureCollection& fc, const std::string& layer) {
  std::error_code ec;
  fs::remove(path, ec);
  sqlite3* raw = nullptr;
  if (sqlite3_open(path.string().c_str(), &raw) != SQLITE_OK) {
    if (raw) sqlite3_close(raw);
    throw DataError("cannot create GeoPackage " + path.string());
  }
  Db db(raw);
  exec(db.get(), "PRAGMA application_id = 1196444487; PRAGMA user_version = 10200;");
  exec(db.get(),
       "CREATE TABLE gpkg_spatial_ref_sys (srs_name TEXT NOT NULL, srs_id INTEGER PRIMARY KEY, "
       "organization TEXT NOT NULL, organization_coordsys_id INTEGER NOT NULL, definition TEXT NOT NULL, "
       "description TEXT);"
       "INSERT INTO gpkg_spatial_ref_sys VALUES ('Undefined cartesian SRS', -1, 'NONE', -1, 'undefined', NULL);"
       "INSERT INTO gpkg_spatial_ref_sys VALUES ('Undefined geographic SRS', 0, 'NONE', 0, 'undefined', NULL);"
       "CREATE TABLE gpkg_contents (table_name TEXT NOT NULL PRIMARY KEY, data_type TEXT NOT NULL, "
       "identifier TEXT UNIQUE, description TEXT DEFAULT '', last_change DATETIME NOT NULL DEFAULT "
       "'1970-01-01T00:00:00.000Z', min_x DOUBLE, min_y DOUBLE, max_x DOUBLE, max_y DOUBLE, srs_id INTEGER);"
       "CREATE TABLE gpkg_geometry_columns (table_name TEXT NOT NULL, column_name TEXT NOT NULL, "
       "geometry_type_name TEXT NOT NULL, srs_id INTEGER NOT NULL, z TINYINT NOT NULL, m TINYINT NOT NULL, "
       "CONSTRAINT pk_geom_cols PRIMARY KEY (table_name, column_name));");
  int srs_id = -1;
  if (fc.crs.epsg && !fc.crs.geographic) {
    srs_id = *fc.crs.epsg;
    auto s = prepare(db.get(), "INSERT INTO gpkg_spatial_ref_sys VALUES (?, ?, 'EPSG', ?, ?, NULL)");
    const std::string name = "EPSG:" + std::to_string(srs_id);
    sqlite3_bind_text(s.get(), 1, name.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_int(s.get(), 2, srs_id);
    sqlite3_bind_int(s.get(), 3, srs_id);
    sqlite3_bind_text(s.get(), 4, "undefined", -1, SQLITE_TRANSIENT);
    sqlite3_step(s.get());
  }

  // Property columns: union of keys, typed from the first non-null value.
  std::vector<std::pair<std::string, std::string>> cols;
  for (const auto& f : fc.features) {
    for (auto it = f.properties.begin(); it != f.properties.end(); ++it) {
      if (it.key() == "fid" || it.key() == "geom") continue;
      if (std::any_of(cols.begin(), cols.end(), [&](const auto& c) { return c.first == it.key(); })) continue;
      std::string t = "TEXT";
      if (it.value().is_number_integer() || it.value().is_boolean()) t = "INTEGER";
      else if (it.value().is_number()) t = "REAL";
      cols.emplace_back(it.key(), t);
    }
  }
  std::string ddl = "CREATE TABLE " + quote_ident(layer) + " (fid INTEGER PRIMARY KEY, geom BLOB";
  for (const auto& [n, t] : cols) ddl += ", " + quote_ident(n) + " " + t;
  ddl += ");";
  exec(db.get(), ddl);
  {
    auto s = prepare(db.get(), "INSERT INTO gpkg_contents (table_name, data_type, identifier, srs_id) VALUES (?, 'features', ?, ?)");
    sqlite3_bind_text(s.get(), 1, layer.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_text(s.get(), 2, layer.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_int(s.get(), 3, srs_id);
    sqlite3_step(s.get());
    auto g = prepare(db.get(), "INSERT INTO gpkg_geometry_columns VALUES (?, 'geom', 'GEOMETRY', ?, 0, 0)");
    sqlite3_bind_text(g.get(), 1, layer.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_int(g.get(), 2, srs_id);
    sqlite3_step(g.get());
  }
  exec(db.get(), "BEGIN");
  std::string ins = "INSERT INTO " + quote_ident(layer) + " VALUES (?, ?";
  for (std::size_t i = 0; i < cols.size(); ++i) ins += ", ?";
  ins += ")";
  auto s = prepare(db.get(), ins);
  for (const auto& f : fc.features) {
    sqlite3_reset(s.get());
    sqlite3_clear_bindings(s.get());
    sqlite3_bind_int64(s.get(), 1, f.id);
    const auto blob = encode_gpkg_blob(f.geometry, srs_id);
    sqlite3_bind_blob(s.get(), 2, blob.data(), static_cast<int>(blob.size()), SQLITE_TRANSIENT);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const int idx = static_cast<int>(i) + 3;
      auto it = f.properties.find(cols[i].first);
      if (it == f.properties.end() || it->is_null()) continue;
      if (it->is_boolean()) sqlite3_bind_int(s.get(), idx, it->get<bool>() ? 1 : 0);
      else if (it->is_number_integer()) sqlite3_bind_int64(s.get(), idx, it->get<std::int64_t>());
      else if (it->is_number()) sqlite3_bind_double(s.get(), idx, it->get<double>());
      else {
        const std::string v = it->is_string() ? it->get<std::string>() : it->dump();
        sqlite3_bind_text(s.get(), idx, v.c_str(), -1, SQLITE_TRANSIENT);
      }
    }
    if (sqlite3_step(s.get()) != SQLITE_DONE) throw DataError(std::string("sqlite insert: ") + sqlite3_errmsg(db.get()));
  }
  exec(db.get(), "COMMIT");
}

bool is_gpkg(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".gpkg";
}

FeatureCollection read_geojson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
  FeatureCollection fc;
  if (doc.contains("meta") && doc["meta"].is_object()) fc.meta = doc["meta"];
  if (doc.contains("crs") && doc["crs"].is_object()) {
    const auto& props = doc["crs"].value("properties", json::object());
    fc.crs = crs_from_name(props.value("name", std::string{}));
  }
  std::vector<json> feats;
  if (doc.value("type", "") == "FeatureCollection") {
    for (const auto& f : doc.at("features")) feats.push_back(f);
  } else if (doc.value("type", "") == "Feature") {
    feats.push_back(doc);
  } else {
    json f;
    f["type"] = "Feature";
    f["geometry"] = doc;
    feats.push_back(f);
  }
  std::int64_t seq = 0;
  for (const auto& f : feats) {
    if (!f.contains("geometry") || f["geometry"].is_null()) continue;
    Feature out;
    out.id = seq++;
    if (f.contains("id") && f["id"].is_number_integer()) out.id = f["id"].get<std::int64_t>();
    out.geometry = geometry_from_geojson(f["geometry"]);
    if (f.contains("properties") && f["properties"].is_object()) out.properties = f["properties"];
    fc.features.push_back(std::move(out));
  }
  return fc;
}

void write_geojson(const fs::path& path, const FeatureCollection& fc) {
  json doc;
  doc["type"] = "FeatureCollection";
  if (fc.crs.epsg) {
    doc["crs"] = {{"type", "name"},
                  {"properties", {{"name", "urn:ogc:def:crs:EPSG::" + std::to_string(*fc.crs.epsg)}}}};
  }
  if (!fc.meta.empty()) doc["meta"] = fc.meta;
  doc["features"] = json::array();
  for (const auto& f : fc.features) {
    json jf;
    jf["type"] = "Feature";
    jf["id"] = f.id;
    jf["properties"] = f.properties;
    jf["geometry"] = geometry_to_geojson(f.geometry);
    doc["features"].push_back(std::move(jf));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump();
}

}  // namespace

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "buildings") return LayerKind::buildings;
  if (s == "streets") return LayerKind::streets;
  if (s == "waterlines") return LayerKind::waterlines;
  if (s == "waterbodies") return LayerKind::waterbodies;
  if (s == "reference") return LayerKind::reference;
  if (s == "study_area" || s == "study-area") return LayerKind::study_area;
  if (s == "cells") return LayerKind::cells;
  if (s == "generic") return LayerKind::generic;
  throw ConfigError("unknown layer kind: " + s);
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::buildings: return "buildings";
    case LayerKind::streets: return "streets";
    case LayerKind::waterlines: return "waterlines";
    case LayerKind::waterbodies: return "waterbodies";
    case LayerKind::reference: return "reference";
    case LayerKind::study_area: return "study_area";
    case LayerKind::cells: return "cells";
    case LayerKind::generic: return "generic";
  }
  return "generic";
}

json geometry_to_geojson(const Geometry& g) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Point>) {
          return {{"type", "Point"}, {"coordinates", coords(v)}};
        } else if constexpr (std::is_same_v<T, LineString>) {
          return {{"type", "LineString"}, {"coordinates", coord_list(v)}};
        } else if constexpr (std::is_same_v<T, Polygon>) {
          return {{"type", "Polygon"}, {"coordinates", polygon_coords(v)}};
        } else if constexpr (std::is_same_v<T, MultiPoint>) {
          return {{"type", "MultiPoint"}, {"coordinates", coord_list(v)}};
        } else if constexpr (std::is_same_v<T, MultiLineString>) {
          json a = json::array();
          for (const auto& l : v) a.push_back(coord_list(l));
          return {{"type", "MultiLineString"}, {"coordinates", a}};
        } else {
          json a = json::array();
          for (const auto& p : v) a.push_back(polygon_coords(p));
          return {{"type", "MultiPolygon"}, {"coordinates", a}};
        }
      },
      g);
}

Geometry geometry_from_geojson(const json& j) {
  const std::string type = j.value("type", "");
  const json& c = j.contains("coordinates") ? j["coordinates"] : json::array();
  if (type == "Point") return point_from(c);
  if (type == "LineString") {
    LineString l;
    points_into(c, l);
    return l;
  }
  if (type == "Polygon") return polygon_from(c);
  if (type == "MultiPoint") {
    MultiPoint mp;
    points_into(c, mp);
    return mp;
  }
  if (type == "MultiLineString") {
    MultiLineString ml;
    for (const auto& l : c) {
      LineString ls;
      points_into(l, ls);
      ml.push_back(std::move(ls));
    }
    return ml;
  }
  if (type == "MultiPolygon") {
    MultiPolygon mp;
    for (const auto& p : c) mp.push_back(polygon_from(p));
    return mp;
  }
  throw DataError("unsupported GeoJSON geometry type: " + type);
}

std::vector<std::uint8_t> to_wkb(const Geometry& g) {
  WkbWriter w;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Point>) {
          w.header(1);
          w.point(v);
        } else if constexpr (std::is_same_v<T, LineString>) {
          w.header(2);
          w.seq(v);
        } else if constexpr (std::is_same_v<T, Polygon>) {
          w.polygon(v);
        } else if constexpr (std::is_same_v<T, MultiPoint>) {
          w.header(4);
          w.u32(static_cast<std::uint32_t>(v.size()));
          for (const auto& p : v) {
            w.header(1);
            w.point(p);
          }
        } else if constexpr (std::is_same_v<T, MultiLineString>) {
          w.header(5);
          w.u32(static_cast<std::uint32_t>(v.size()));
          for (const auto& l : v) {
            w.header(2);
            w.seq(l);
          }
        } else {
          w.header(6);
          w.u32(static_cast<std::uint32_t>(v.size()));
          for (const auto& p : v) w.polygon(p);
        }
      },
      g);
  return w.take();
}

Geometry from_wkb(const std::uint8_t* data, std::size_t size) {
  WkbReader r(data, size);
  return r.read();
}

std::vector<Polygon> polygon_parts(const Geometry& g) {
  if (const auto* p = std::get_if<Polygon>(&g)) return {*p};
  if (const auto* mp = std::get_if<MultiPolygon>(&g)) return std::vector<Polygon>(mp->begin(), mp->end());
  return {};
}

std::vector<LineString> line_parts(const Geometry& g) {
  if (const auto* l = std::get_if<LineString>(&g)) return {*l};
  if (const auto* ml = std::get_if<MultiLineString>(&g)) return std::vector<LineString>(ml->begin(), ml->end());
  return {};
}

FeatureCollection read_layer(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("file not found: " + path.string());
  return is_gpkg(path) ? read_gpkg(path) : read_geojson(path);
}

FeatureCollection load_layer(const fs::path& path, LayerKind kind) {
  FeatureCollection fc = read_layer(path);
  if (fc.crs.geographic) {
    throw DataError("projected CRS required: " + path.string() + " uses a geographic CRS (" + fc.crs.name +
                    "); reproject to a metric CRS first");
  }
  if (fc.features.empty()) throw DataError("empty layer: " + path.string());

  auto polygonal = [](const Geometry& g) {
    return std::holds_alternative<Polygon>(g) || std::holds_alternative<MultiPolygon>(g);
  };
  auto linear = [](const Geometry& g) {
    return std::holds_alternative<LineString>(g) || std::holds_alternative<MultiLineString>(g);
  };
  std::vector<Feature> kept;
  for (auto& f : fc.features) {
    bool ok = true;
    switch (kind) {
      case LayerKind::buildings:
      case LayerKind::waterbodies:
      case LayerKind::reference:
      case LayerKind::study_area:
      case LayerKind::cells:
        ok = polygonal(f.geometry);
        break;
      case LayerKind::streets:
        ok = linear(f.geometry) && f.properties.value("class", std::string{}) != "service";
        break;
      case LayerKind::waterlines:
        ok = linear(f.geometry);
        break;
      case LayerKind::generic:
        break;
    }
    if (ok)
      kept.push_back(std::move(f));
    else
      ++fc.dropped;
  }
  fc.features = std::move(kept);
  if (fc.features.empty()) throw DataError("empty layer after type filtering: " + path.string());
  return fc;
}

void write_layer(const fs::path& path, const FeatureCollection& fc, const std::string& layer_name) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (is_gpkg(path))
    write_gpkg(path, fc, layer_name);
  else
    write_geojson(path, fc);
}

}  // namespace morpholcz::io
