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

#include "lens/keypoint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lens::keypoint {
namespace {

constexpr double kDetTolerance = 1e-12;
constexpr double kMaxCondition = 1e8;

void require_heatmap(const Tensor& heatmap) {
  if (heatmap.rank() != 2) {
    throw std::invalid_argument("heatmap must be h x w, got " + shape_string(heatmap.dims()));
  }
}

double clip_unit(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, -1.0, 1.0);
}

bool ill_conditioned(double a, double b, double c) {
  const double det = a * c - b * b;
  const double trace = a + c;
  if (!(std::abs(det) >= kDetTolerance * trace * trace)) return true;
  const double mid = 0.5 * trace;
  const double spread = std::hypot(0.5 * (a - c), b);
  const double big = std::max(std::abs(mid + spread), std::abs(mid - spread));
  const double small = std::min(std::abs(mid + spread), std::abs(mid - spread));
  return small == 0.0 || big / small > kMaxCondition;
}

}  // namespace

KeypointSet nms_extract(const Tensor& heatmap, double radius, std::size_t max_points) {
  require_heatmap(heatmap);
  if (!(radius > 0.0)) throw std::invalid_argument("nms radius must be positive");
  if (max_points == 0) throw std::invalid_argument("max_points must be >= 1");
  const std::size_t height = heatmap.dim(0), width = heatmap.dim(1);
  Tensor work = heatmap;
  const double r2 = radius * radius;
  const auto reach = static_cast<std::ptrdiff_t>(std::floor(radius));

  KeypointSet out;
  while (out.size() < max_points) {
    // max_element returns the first maximum, i.e. the lowest flat index.
    const auto it = std::max_element(work.data().begin(), work.data().end());
    if (!(*it > 0.0)) break;
    const auto flat = static_cast<std::size_t>(it - work.data().begin());
    const std::size_t row = flat / width, col = flat % width;
    out.push_back({static_cast<double>(col), static_cast<double>(row), heatmap[flat], col, row});

    const auto r0 = static_cast<std::ptrdiff_t>(row), c0 = static_cast<std::ptrdiff_t>(col);
    for (std::ptrdiff_t dy = -reach; dy <= reach; ++dy) {
      const std::ptrdiff_t y = r0 + dy;
      if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) continue;
      for (std::ptrdiff_t dx = -reach; dx <= reach; ++dx) {
        const std::ptrdiff_t x = c0 + dx;
        if (x < 0 || x >= static_cast<std::ptrdiff_t>(width)) continue;
        if (static_cast<double>(dx * dx + dy * dy) <= r2) {
          work(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 0.0;
        }
      }
    }
  }
  return out;
}

RefinementStep newton_step(const Tensor& heatmap, std::size_t col, std::size_t row,
                           double epsilon) {
  require_heatmap(heatmap);
  const std::size_t height = heatmap.dim(0), width = heatmap.dim(1);
  if (col >= width || row >= height) {
    throw std::out_of_range("keypoint (" + std::to_string(col) + ", " + std::to_string(row) +
                            ") outside " + shape_string(heatmap.dims()) + " heatmap");
  }
  // Normalized align-corners coordinates; one cell is 2 / (extent - 1).
  const double span_x = width > 1 ? static_cast<double>(width - 1) : 1.0;
  const double span_y = height > 1 ? static_cast<double>(height - 1) : 1.0;
  const double nx = 2.0 * static_cast<double>(col) / span_x - 1.0;
  const double ny = 2.0 * static_cast<double>(row) / span_y - 1.0;
  const double step_x = width > 1 ? 2.0 / span_x : 0.0;
  const double step_y = height > 1 ? 2.0 / span_y : 0.0;
  auto sample = [&](double gx, double gy) {
    const Point2 p{(gx + 1.0) * 0.5 * span_x, (gy + 1.0) * 0.5 * span_y};
    double v = 0.0;
    for (const Tap& tap : bilinear_taps(p.x, p.y, height, width)) v += tap.weight * heatmap[tap.index];
    return v;
  };

  const double v0 = sample(nx, ny);
  const double v1 = sample(nx + step_x, ny);
  const double v2 = sample(nx - step_x, ny);
  const double v3 = sample(nx, ny + step_y);
  const double v4 = sample(nx, ny - step_y);
  const double v5 = sample(nx + step_x, ny + step_y);
  const double v6 = sample(nx - step_x, ny - step_y);
  const double v7 = sample(nx - step_x, ny + step_y);
  const double v8 = sample(nx + step_x, ny - step_y);

  RefinementStep s;
  s.dx = 0.5 * (v1 - v2);
  s.dy = 0.5 * (v3 - v4);
  s.dxx = v1 - 2.0 * v0 + v2;
  s.dyy = v3 - 2.0 * v0 + v4;
  s.dxy = 0.25 * (v5 + v6 - v7 - v8);

  const double a = s.dxx + epsilon, b = s.dxy, c = s.dyy + epsilon;
  if (ill_conditioned(a, b, c)) {
    s.diagonal_fallback = true;
    s.offset_x = -s.dx / a;
    s.offset_y = -s.dy / c;
  } else {
    const double det = a * c - b * b;
    s.offset_x = -(c * s.dx - b * s.dy) / det;
    s.offset_y = -(a * s.dy - b * s.dx) / det;
  }
  return s;
}

KeypointSet subpixel_refine(const Tensor& heatmap, const KeypointSet& points, double epsilon) {
  KeypointSet out;
  out.reserve(points.size());
  for (const Keypoint& p : points) {
    const RefinementStep step = newton_step(heatmap, p.col, p.row, epsilon);
    Keypoint refined = p;
    refined.x = static_cast<double>(p.col) + clip_unit(step.offset_x);
    refined.y = static_cast<double>(p.row) + clip_unit(step.offset_y);
    out.push_back(refined);
  }
  return out;
}

std::vector<Point2> window_offsets(std::size_t window) {
  if (window % 2 == 0) throw std::invalid_argument("neighbourhood window must be odd");
  const double half = static_cast<double>(window / 2);
  std::vector<Point2> offsets;
  offsets.reserve(window * window);
  for (std::size_t iy = 0; iy < window; ++iy) {
    for (std::size_t ix = 0; ix < window; ++ix) {
      offsets.push_back({static_cast<double>(ix) - half, static_cast<double>(iy) - half});
    }
  }
  return offsets;
}

std::vector<Tensor> sample_neighborhoods(const Tensor& features, const KeypointSet& points,
                                         std::size_t window) {
  if (features.rank() != 3) {
    throw std::invalid_argument("features must be h x w x d, got " + shape_string(features.dims()));
  }
  const std::vector<Point2> offsets = window_offsets(window);
  std::vector<Tensor> out;
  out.reserve(points.size());
  std::vector<Point2> locations(offsets.size());
  for (const Keypoint& p : points) {
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      locations[j] = {p.x + offsets[j].x, p.y + offsets[j].y};
    }
    out.push_back(bilinear_sample(features, locations));
  }
  return out;
}

SparseRows neighborhood_operator(const KeypointSet& points, std::size_t height, std::size_t width,
                                 std::size_t window) {
  const std::vector<Point2> offsets = window_offsets(window);
  SparseRows op;
  op.source_rows = height * width;
  op.rows.reserve(points.size() * offsets.size());
  for (const Keypoint& p : points) {
    for (const Point2& o : offsets) {
      const auto taps = bilinear_taps(p.x + o.x, p.y + o.y, height, width);
      op.rows.emplace_back(taps.begin(), taps.end());
    }
  }
  return op;
}

}  // namespace lens::keypoint
