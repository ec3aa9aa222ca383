// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <limits>
#include <string>

#include "morpholcz/kernels.hpp"

namespace morpholcz::kernels {

namespace {

Isa detect() {
  if (const char* env = std::getenv("MORPHOLCZ_ISA")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return avx2_supported() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2_supported()) return;
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

MaskedStats masked_stats(std::span<const float> values) {
  return active_isa() == Isa::avx2 ? avx2::masked_stats(values) : scalar::masked_stats(values);
}

double min_point_segment_dist2(double px, double py, const SegmentSoA& segs) {
  return active_isa() == Isa::avx2 ? avx2::min_point_segment_dist2(px, py, segs)
                                   : scalar::min_point_segment_dist2(px, py, segs);
}

double min_points_segments_dist2(std::span<const double> xs, std::span<const double> ys,
                                 const SegmentSoA& segs) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    best = std::min(best, min_point_segment_dist2(xs[i], ys[i], segs));
  }
  return best;
}

}  // namespace morpholcz::kernels
