// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "morpholcz/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace morpholcz::kernels {

void SegmentSoA::push(double x0, double y0, double x1, double y1) {
  const double ddx = x1 - x0;
  const double ddy = y1 - y0;
  const double l2 = ddx * ddx + ddy * ddy;
  ax.push_back(x0);
  ay.push_back(y0);
  dx.push_back(ddx);
  dy.push_back(ddy);
  inv_len2.push_back(l2 > 0.0 ? 1.0 / l2 : 0.0);
}

void SegmentSoA::clear() {
  ax.clear();
  ay.clear();
  dx.clear();
  dy.clear();
  inv_len2.clear();
}

namespace scalar {

MaskedStats masked_stats(std::span<const float> values) {
  MaskedStats s;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (float f : values) {
    if (std::isnan(f)) continue;
    const double v = f;
    ++s.count;
    s.sum += v;
    s.sumsq += v * v;
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  if (s.count > 0) {
    s.min = mn;
    s.max = mx;
  }
  return s;
}

double min_point_segment_dist2(double px, double py, const SegmentSoA& segs) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = segs.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double rx = px - segs.ax[i];
    const double ry = py - segs.ay[i];
    double t = (rx * segs.dx[i] + ry * segs.dy[i]) * segs.inv_len2[i];
    t = std::min(1.0, std::max(0.0, t));
    const double ex = rx - t * segs.dx[i];
    const double ey = ry - t * segs.dy[i];
    const double d2 = ex * ex + ey * ey;
    best = std::min(best, d2);
  }
  return best;
}

}  // namespace scalar
}  // namespace morpholcz::kernels
