// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/raster.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "morpholcz/error.hpp"

namespace morpholcz {

void Raster::add_band(std::string name, std::vector<double> v) {
  if (v.size() != size()) throw DataError("band " + name + " does not match the raster grid");
  names.push_back(std::move(name));
  bands.push_back(std::move(v));
}

namespace {

enum : std::uint16_t { kShort = 3, kLong = 4, kDouble = 12, kAscii = 2 };

struct Entry {
  std::uint16_t tag, type;
  std::uint32_t count;
  std::vector<std::uint8_t> data;  // little-endian payload
};

template <class T>
void put(std::vector<std::uint8_t>& b, T v) {
  std::uint8_t tmp[sizeof(T)];
  std::memcpy(tmp, &v, sizeof(T));
  b.insert(b.end(), tmp, tmp + sizeof(T));
}

Entry shorts(std::uint16_t tag, const std::vector<std::uint16_t>& v) {
  Entry e{tag, kShort, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put(e.data, x);
  return e;
}

Entry longs(std::uint16_t tag, const std::vector<std::uint32_t>& v) {
  Entry e{tag, kLong, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put(e.data, x);
  return e;
}

Entry doubles(std::uint16_t tag, const std::vector<double>& v) {
  Entry e{tag, kDouble, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put(e.data, x);
  return e;
}

Entry ascii(std::uint16_t tag, const std::string& s) {
  Entry e{tag, kAscii, static_cast<std::uint32_t>(s.size() + 1), {}};
  e.data.assign(s.begin(), s.end());
  e.data.push_back(0);
  return e;
}

}  // namespace

void write_geotiff(const std::filesystem::path& path, const Raster& r, PixelType type, const nlohmann::json& meta) {
  const std::size_t w = r.grid.width, h = r.grid.height, nb = r.bands.size();
  if (nb == 0 || w == 0 || h == 0) throw DataError("cannot write an empty raster: " + path.string());
  const std::size_t bps = type == PixelType::float32 ? 4 : 1;
  const std::size_t row_bytes = w * nb * bps;

  std::vector<std::uint8_t> pixels;
  pixels.reserve(row_bytes * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t b = 0; b < nb; ++b) {
        const double v = r.bands[b][y * w + x];
        if (type == PixelType::float32) {
          put(pixels, static_cast<float>(v));
        } else {
          pixels.push_back(std::isnan(v) ? 0 : static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)));
        }
      }

  nlohmann::json desc = meta;
  desc["bands"] = r.names;

  std::vector<Entry> tags;
  tags.push_back(longs(256, {static_cast<std::uint32_t>(w)}));
  tags.push_back(longs(257, {static_cast<std::uint32_t>(h)}));
  tags.push_back(shorts(258, std::vector<std::uint16_t>(nb, static_cast<std::uint16_t>(bps * 8))));
  tags.push_back(shorts(259, {1}));
  tags.push_back(shorts(262, {1}));
  tags.push_back(ascii(270, desc.dump()));
  std::vector<std::uint32_t> offsets(h), counts(h, static_cast<std::uint32_t>(row_bytes));
  tags.push_back(longs(273, offsets));  // patched below
  tags.push_back(shorts(277, {static_cast<std::uint16_t>(nb)}));
  tags.push_back(longs(278, {1}));
  tags.push_back(longs(279, counts));
  tags.push_back(shorts(284, {1}));
  if (nb > 1) tags.push_back(shorts(338, std::vector<std::uint16_t>(nb - 1, 0)));
  tags.push_back(shorts(339, std::vector<std::uint16_t>(nb, type == PixelType::float32 ? 3 : 1)));
  tags.push_back(doubles(33550, {r.grid.pixel, r.grid.pixel, 0.0}));
  tags.push_back(doubles(33922, {0.0, 0.0, 0.0, r.grid.x0, r.grid.y0, 0.0}));
  std::vector<std::uint16_t> keys = {1, 1, 0, 0};
  auto key = [&](std::uint16_t id, std::uint16_t v) {
    keys.insert(keys.end(), {id, 0, 1, v});
    ++keys[3];
  };
  key(1024, 1);  // projected model
  key(1025, 1);  // pixel is area
  if (r.grid.epsg) key(3072, static_cast<std::uint16_t>(*r.grid.epsg));
  tags.push_back(shorts(34735, keys));
  tags.push_back(ascii(42113, type == PixelType::float32 ? "nan" : "0"));

  // Layout: header, pixel data, out-of-line tag payloads, IFD.
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'I', 'I', 42, 0});
  put<std::uint32_t>(out, 0);  // IFD offset, patched
  const std::uint32_t data_off = static_cast<std::uint32_t>(out.size());
  out.insert(out.end(), pixels.begin(), pixels.end());
  for (std::size_t y = 0; y < h; ++y) offsets[y] = data_off + static_cast<std::uint32_t>(y * row_bytes);
  for (auto& t : tags)
    if (t.tag == 273) t = longs(273, offsets);

  std::vector<std::uint32_t> value_field(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].data.size() <= 4) continue;
    if (out.size() % 2) out.push_back(0);
    value_field[i] = static_cast<std::uint32_t>(out.size());
    out.insert(out.end(), tags[i].data.begin(), tags[i].data.end());
  }
  if (out.size() % 2) out.push_back(0);
  const auto ifd = static_cast<std::uint32_t>(out.size());
  std::memcpy(out.data() + 4, &ifd, 4);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(tags.size()));
  for (std::size_t i = 0; i < tags.size(); ++i) {
    put(out, tags[i].tag);
    put(out, tags[i].type);
    put(out, tags[i].count);
    if (tags[i].data.size() <= 4) {
      std::uint8_t inl[4] = {0, 0, 0, 0};
      std::memcpy(inl, tags[i].data.data(), tags[i].data.size());
      out.insert(out.end(), inl, inl + 4);
    } else {
      put(out, value_field[i]);
    }
  }
  put<std::uint32_t>(out, 0);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

namespace {

struct Reader {
  std::vector<std::uint8_t> buf;
  bool big = false;
  std::string path;

  template <class T>
  T get(std::size_t off) const {
    if (off + sizeof(T) > buf.size()) throw DataError("truncated TIFF: " + path);
    std::uint8_t tmp[sizeof(T)];
    std::memcpy(tmp, buf.data() + off, sizeof(T));
    if (big) std::reverse(tmp, tmp + sizeof(T));
    T v;
    std::memcpy(&v, tmp, sizeof(T));
    return v;
  }
};

std::size_t type_size(std::uint16_t t) {
  switch (t) {
    case 1: case 2: case 6: case 7: return 1;
    case 3: case 8: return 2;
    case 4: case 9: case 11: return 4;
    case 5: case 10: case 12: return 8;
  }
  return 0;
}

}  // namespace

Raster read_geotiff(const std::filesystem::path& path, nlohmann::json* meta) {
  Reader rd;
  rd.path = path.string();
  {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open raster: " + path.string());
    rd.buf.assign(std::istreambuf_iterator<char>(f), {});
  }
  if (rd.buf.size() < 8) throw DataError("not a TIFF file: " + path.string());
  if (rd.buf[0] == 'M' && rd.buf[1] == 'M') {
    rd.big = true;
  } else if (!(rd.buf[0] == 'I' && rd.buf[1] == 'I')) {
    throw DataError("not a TIFF file: " + path.string());
  }
  if (rd.get<std::uint16_t>(2) != 42) throw DataError("unsupported TIFF variant (BigTIFF?): " + path.string());
  const std::uint32_t ifd = rd.get<std::uint32_t>(4);
  const std::uint16_t n = rd.get<std::uint16_t>(ifd);

  std::map<std::uint16_t, std::vector<double>> num;
  std::map<std::uint16_t, std::string> str;
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::size_t e = ifd + 2 + 12u * i;
    const auto tag = rd.get<std::uint16_t>(e);
    const auto type = rd.get<std::uint16_t>(e + 2);
    const auto count = rd.get<std::uint32_t>(e + 4);
    const std::size_t sz = type_size(type) * count;
    const std::size_t off = sz <= 4 ? e + 8 : rd.get<std::uint32_t>(e + 8);
    if (type == kAscii) {
      if (off + count > rd.buf.size()) throw DataError("truncated TIFF: " + rd.path);
      std::string s(reinterpret_cast<const char*>(rd.buf.data() + off), count);
      while (!s.empty() && s.back() == '\0') s.pop_back();
      str[tag] = s;
      continue;
    }
    auto& v = num[tag];
    for (std::uint32_t k = 0; k < count; ++k) {
      const std::size_t o = off + k * type_size(type);
      switch (type) {
        case 1: v.push_back(rd.get<std::uint8_t>(o)); break;
        case kShort: v.push_back(rd.get<std::uint16_t>(o)); break;
        case kLong: v.push_back(rd.get<std::uint32_t>(o)); break;
        case 11: v.push_back(rd.get<float>(o)); break;
        case kDouble: v.push_back(rd.get<double>(o)); break;
        default: break;
      }
    }
  }
  auto one = [&](std::uint16_t tag, double def) { return num.count(tag) && !num[tag].empty() ? num[tag][0] : def; };
  if (one(259, 1) != 1) throw DataError("compressed TIFFs are not supported: " + path.string());
  if (!num.count(273)) throw DataError("tiled TIFFs are not supported: " + path.string());

  Raster r;
  r.grid.width = static_cast<std::size_t>(one(256, 0));
  r.grid.height = static_cast<std::size_t>(one(257, 0));
  const auto nb = static_cast<std::size_t>(one(277, 1));
  const auto bits = static_cast<std::size_t>(one(258, 8));
  const int fmt = static_cast<int>(one(339, 1));
  const bool planar = one(284, 1) == 2;
  const auto rows_per_strip = static_cast<std::size_t>(one(278, static_cast<double>(r.grid.height)));
  if (num.count(33550) && num[33550].size() >= 2) {
    r.grid.pixel = num[33550][0];
    if (std::abs(num[33550][1] - num[33550][0]) > 1e-9 * num[33550][0])
      throw DataError("non-square pixels are not supported: " + path.string());
  }
  if (num.count(33922) && num[33922].size() >= 6) {
    const auto& t = num[33922];
    r.grid.x0 = t[3] - t[0] * r.grid.pixel;
    r.grid.y0 = t[4] + t[1] * r.grid.pixel;
  }
  if (num.count(34735)) {
    const auto& k = num[34735];
    for (std::size_t i = 4; i + 3 < k.size(); i += 4)
      if (k[i] == 3072 && k[i + 1] == 0) r.grid.epsg = static_cast<int>(k[i + 3]);
  }
  std::optional<double> nodata;
  if (str.count(42113)) {
    const std::string s = str[42113];
    if (s != "nan" && s != "NaN" && !s.empty()) nodata = std::stod(s);
  }
  nlohmann::json desc;
  if (str.count(270)) desc = nlohmann::json::parse(str[270], nullptr, false);
  if (meta) *meta = desc.is_discarded() ? nlohmann::json() : desc;

  const std::size_t bpp = bits / 8;
  const auto& offs = num[273];
  const std::size_t w = r.grid.width, h = r.grid.height;
  r.bands.assign(nb, std::vector<double>(w * h));
  auto sample = [&](std::size_t o) -> double {
    if (fmt == 3) return bpp == 4 ? rd.get<float>(o) : rd.get<double>(o);
    if (fmt == 2) {
      if (bpp == 1) return rd.get<std::int8_t>(o);
      if (bpp == 2) return rd.get<std::int16_t>(o);
      return rd.get<std::int32_t>(o);
    }
    if (bpp == 1) return rd.get<std::uint8_t>(o);
    if (bpp == 2) return rd.get<std::uint16_t>(o);
    return rd.get<std::uint32_t>(o);
  };
  const std::size_t strips_per_band = (h + rows_per_strip - 1) / rows_per_strip;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        std::size_t o;
        if (planar) {
          const std::size_t s = b * strips_per_band + y / rows_per_strip;
          o = static_cast<std::size_t>(offs.at(s)) + ((y % rows_per_strip) * w + x) * bpp;
        } else {
          o = static_cast<std::size_t>(offs.at(y / rows_per_strip)) + (((y % rows_per_strip) * w + x) * nb + b) * bpp;
        }
        double v = sample(o);
        if (nodata && v == *nodata) v = std::numeric_limits<double>::quiet_NaN();
        r.bands[b][y * w + x] = v;
      }
  if (desc.is_object() && desc.contains("bands") && desc["bands"].size() == nb) {
    r.names = desc["bands"].get<std::vector<std::string>>();
  } else {
    for (std::size_t b = 0; b < nb; ++b) r.names.push_back("b" + std::to_string(b + 1));
  }
  return r;
}

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != width * height * 3) throw DataError("PNG buffer size mismatch");
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + y * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace morpholcz
