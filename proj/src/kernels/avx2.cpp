// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2; only reached through the runtime dispatcher.

#include "morpholcz/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace morpholcz::kernels::avx2 {

namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

float hmin(__m256 v) {
  alignas(32) float buf[8];
  _mm256_store_ps(buf, v);
  return *std::min_element(buf, buf + 8);
}

float hmax(__m256 v) {
  alignas(32) float buf[8];
  _mm256_store_ps(buf, v);
  return *std::max_element(buf, buf + 8);
}

double hmin_pd(__m256d v) {
  alignas(32) double buf[4];
  _mm256_store_pd(buf, v);
  return std::min(std::min(buf[0], buf[1]), std::min(buf[2], buf[3]));
}

}  // namespace

MaskedStats masked_stats(std::span<const float> values) {
  const std::size_t n = values.size();
  const float* p = values.data();
  const __m256 pos_inf = _mm256_set1_ps(std::numeric_limits<float>::infinity());
  const __m256 neg_inf = _mm256_set1_ps(-std::numeric_limits<float>::infinity());
  __m256d sum = _mm256_setzero_pd();
  __m256d sumsq = _mm256_setzero_pd();
  __m256 vmin = pos_inf;
  __m256 vmax = neg_inf;
  std::size_t count = 0;

  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(p + i);
    const __m256 ord = _mm256_cmp_ps(v, v, _CMP_ORD_Q);
    count += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_ps(ord)));
    const __m256 vz = _mm256_and_ps(v, ord);
    const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(vz));
    const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(vz, 1));
    sum = _mm256_add_pd(sum, _mm256_add_pd(lo, hi));
    sumsq = _mm256_add_pd(sumsq, _mm256_add_pd(_mm256_mul_pd(lo, lo), _mm256_mul_pd(hi, hi)));
    vmin = _mm256_min_ps(vmin, _mm256_blendv_ps(pos_inf, v, ord));
    vmax = _mm256_max_ps(vmax, _mm256_blendv_ps(neg_inf, v, ord));
  }

  MaskedStats s;
  s.sum = hsum(sum);
  s.sumsq = hsum(sumsq);
  double mn = hmin(vmin);
  double mx = hmax(vmax);
  for (; i < n; ++i) {
    const float f = p[i];
    if (std::isnan(f)) continue;
    const double v = f;
    ++count;
    s.sum += v;
    s.sumsq += v * v;
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  s.count = count;
  if (count > 0) {
    s.min = mn;
    s.max = mx;
  }
  return s;
}

double min_point_segment_dist2(double px, double py, const SegmentSoA& segs) {
  const std::size_t n = segs.size();
  const __m256d vpx = _mm256_set1_pd(px);
  const __m256d vpy = _mm256_set1_pd(py);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d rx = _mm256_sub_pd(vpx, _mm256_loadu_pd(&segs.ax[i]));
    const __m256d ry = _mm256_sub_pd(vpy, _mm256_loadu_pd(&segs.ay[i]));
    const __m256d dx = _mm256_loadu_pd(&segs.dx[i]);
    const __m256d dy = _mm256_loadu_pd(&segs.dy[i]);
    __m256d t = _mm256_mul_pd(_mm256_add_pd(_mm256_mul_pd(rx, dx), _mm256_mul_pd(ry, dy)),
                              _mm256_loadu_pd(&segs.inv_len2[i]));
    t = _mm256_min_pd(one, _mm256_max_pd(zero, t));
    const __m256d ex = _mm256_sub_pd(rx, _mm256_mul_pd(t, dx));
    const __m256d ey = _mm256_sub_pd(ry, _mm256_mul_pd(t, dy));
    const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(ex, ex), _mm256_mul_pd(ey, ey));
    best = _mm256_min_pd(best, d2);
  }
  double b = hmin_pd(best);
  for (; i < n; ++i) {
    const double rx = px - segs.ax[i];
    const double ry = py - segs.ay[i];
    double t = (rx * segs.dx[i] + ry * segs.dy[i]) * segs.inv_len2[i];
    t = std::min(1.0, std::max(0.0, t));
    const double ex = rx - t * segs.dx[i];
    const double ey = ry - t * segs.dy[i];
    b = std::min(b, ex * ex + ey * ey);
  }
  return b;
}

}  // namespace morpholcz::kernels::avx2
