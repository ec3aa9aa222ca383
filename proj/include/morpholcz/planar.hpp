// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "morpholcz/geometry.hpp"

namespace morpholcz::geom {

/// Bounded faces of the planar arrangement formed by `segments`.
///
/// Segments are noded at every crossing, touching point and collinear
/// overlap; vertices closer than `snap_tol` are merged. Dangling edges and
/// bridges are discarded, so every face is bounded by closed cycles. Nested
/// components become holes of the smallest enclosing face. Output polygons
/// use Boost orientation (clockwise shell, counter-clockwise holes) and are
/// ordered deterministically for a given input.
std::vector<Polygon> polygonize(std::span<const Segment> segments, double snap_tol = 1e-7);

/// Split segments so no two cross or overlap except at shared endpoints.
std::vector<Segment> node_segments(std::span<const Segment> segments, double snap_tol = 1e-7);

}  // namespace morpholcz::geom
