// Copyright 2026 The LENS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <vector>

#include "lens/numerics.hpp"
#include "lens/tensor.hpp"

namespace lens::keypoint {

/// A prompt location on the grounding map. (x, y) is continuous after
/// refinement; (col, row) is the integer cell NMS selected it from.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  std::size_t col = 0;
  std::size_t row = 0;

  Point2 position() const { return {x, y}; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

/// Ordered by descending score; at most the configured maximum.
using KeypointSet = std::vector<Keypoint>;

inline constexpr double kDefaultRadius = 4.0;
inline constexpr std::size_t kDefaultMaxPoints = 16;
inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr std::size_t kDefaultWindow = 3;

/// Greedy select-max-then-suppress. Repeatedly takes the largest remaining
/// value (lowest row-major index on ties), zeroes every cell within
/// Euclidean distance `radius` of it, and stops once nothing positive
/// remains or `max_points` are taken.
KeypointSet nms_extract(const Tensor& heatmap, double radius = kDefaultRadius,
                        std::size_t max_points = kDefaultMaxPoints);

/// Local quadratic model at one integer cell and the resulting offset.
struct RefinementStep {
  double dx = 0.0, dy = 0.0;      // gradient (D_x, D_y)
  double dxx = 0.0, dyy = 0.0;    // curvature (D_xx, D_yy)
  double dxy = 0.0;               // mixed term D_xy
  double offset_x = 0.0;          // unclipped Newton offset
  double offset_y = 0.0;
  bool diagonal_fallback = false;
};

/// Central differences of the 3x3 neighbourhood sampled in normalized
/// align-corners coordinates, then delta = -(H + eps I)^-1 g, or the
/// per-axis fallback when H + eps I is ill-conditioned.
RefinementStep newton_step(const Tensor& heatmap, std::size_t col, std::size_t row,
                           double epsilon = kDefaultEpsilon);

/// One regularized Newton step per point, offsets clipped to [-1, 1].
/// Throws std::out_of_range for a point outside the heatmap.
KeypointSet subpixel_refine(const Tensor& heatmap, const KeypointSet& points,
                            double epsilon = kDefaultEpsilon);

/// Cell offsets of a window x window stencil, row-major (dy outer, dx inner).
std::vector<Point2> window_offsets(std::size_t window);

/// For each point, window^2 bilinear samples of an h x w x d feature field
/// at the point plus integer cell offsets, border clamped. Each entry is a
/// window^2 x d matrix.
std::vector<Tensor> sample_neighborhoods(const Tensor& features, const KeypointSet& points,
                                         std::size_t window = kDefaultWindow);

/// The same sampling as a sparse operator over the h*w feature rows; output
/// row k * window^2 + j is sample j of point k.
SparseRows neighborhood_operator(const KeypointSet& points, std::size_t height,
                                 std::size_t width, std::size_t window = kDefaultWindow);

}  // namespace lens::keypoint
