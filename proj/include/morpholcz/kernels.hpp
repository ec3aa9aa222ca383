// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

// Data-parallel inner loops. Each kernel has a scalar reference under
// `kernels::scalar` and an AVX2 variant under `kernels::avx2`; the free
// functions dispatch at runtime on CPU support (override with the
// MORPHOLCZ_ISA=scalar environment variable or force_isa()).
namespace morpholcz::kernels {

enum class Isa { scalar, avx2 };

Isa active_isa();
bool avx2_supported();
/// Test hook; forcing avx2 on a CPU without it is ignored.
void force_isa(Isa isa);
std::string_view isa_name(Isa isa);

/// Running statistics over the non-NaN entries of a float span.
struct MaskedStats {
  std::size_t count = 0;
  double sum = 0.0;
  double sumsq = 0.0;
  double min = 0.0;  // valid only when count > 0
  double max = 0.0;
};

/// Segments in structure-of-arrays form: start point and direction, plus
/// 1/|d|^2 (0 for degenerate segments).
struct SegmentSoA {
  std::vector<double> ax, ay, dx, dy, inv_len2;
  std::size_t size() const { return ax.size(); }
  void push(double x0, double y0, double x1, double y1);
  void clear();
};

MaskedStats masked_stats(std::span<const float> values);
/// Squared distance from (px, py) to the nearest segment; +inf if empty.
double min_point_segment_dist2(double px, double py, const SegmentSoA& segs);
/// Min over a batch of query points.
double min_points_segments_dist2(std::span<const double> xs, std::span<const double> ys,
                                 const SegmentSoA& segs);

namespace scalar {
MaskedStats masked_stats(std::span<const float> values);
double min_point_segment_dist2(double px, double py, const SegmentSoA& segs);
}  // namespace scalar

namespace avx2 {
MaskedStats masked_stats(std::span<const float> values);
double min_point_segment_dist2(double px, double py, const SegmentSoA& segs);
}  // namespace avx2

}  // namespace morpholcz::kernels
