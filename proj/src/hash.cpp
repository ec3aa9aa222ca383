// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/hash.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>

#include "morpholcz/error.hpp"

namespace morpholcz {

namespace {
std::string hex(const unsigned char* d, unsigned n) {
  static const char* k = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < n; ++i) {
    s.push_back(k[d[i] >> 4]);
    s.push_back(k[d[i] & 15]);
  }
  return s;
}

struct Ctx {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> p{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  Ctx() { EVP_DigestInit_ex(p.get(), EVP_sha256(), nullptr); }
  void update(const void* d, std::size_t n) { EVP_DigestUpdate(p.get(), d, n); }
  std::string final() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_DigestFinal_ex(p.get(), md, &n);
    return hex(md, n);
  }
};
}  // namespace

std::string sha256_hex(std::string_view data) {
  Ctx c;
  c.update(data.data(), data.size());
  return c.final();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  Ctx c;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    c.update(buf, static_cast<std::size_t>(f.gcount()));
  }
  return c.final();
}

}  // namespace morpholcz
