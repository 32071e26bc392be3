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

#include "lens/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lens {
namespace {

constexpr double kMaskedThreshold = kMaskSentinel / 2;

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected a matrix, got " +
                                shape_string(t.dims()));
  }
}

void softmax_row(std::span<const double> logits, std::span<const double> mask,
                 std::span<double> out) {
  double peak = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (!mask.empty() && mask[j] <= kMaskedThreshold) continue;
    peak = std::max(peak, logits[j] + (mask.empty() ? 0.0 : mask[j]));
    any = true;
  }
  if (!any) throw std::domain_error("degenerate attention row");
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (!mask.empty() && mask[j] <= kMaskedThreshold) {
      out[j] = 0.0;
      continue;
    }
    out[j] = std::exp(logits[j] + (mask.empty() ? 0.0 : mask[j]) - peak);
    total += out[j];
  }
  for (double& v : out) v /= total;
}

}  // namespace

Tensor causal_mask(std::size_t length) {
  Tensor mask = Tensor::matrix(length, length);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t j = i + 1; j < length; ++j) mask(i, j) = kMaskSentinel;
  }
  return mask;
}

Tensor softmax_masked(const Tensor& logits, const Tensor& additive_mask) {
  require_matrix(logits, "softmax_masked");
  require_same_shape(logits, additive_mask, "softmax_masked");
  Tensor out(logits.dims());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    softmax_row(logits.row(i), additive_mask.row(i), out.row(i));
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits, bool causal) {
  require_matrix(logits, "softmax_rows");
  Tensor out(logits.dims());
  const std::size_t cols = logits.cols();
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!causal) {
      softmax_row(logits.row(i), {}, out.row(i));
      continue;
    }
    const std::size_t visible = std::min(cols, i + 1);
    softmax_row(logits.row(i).first(visible), {}, out.row(i).first(visible));
    std::fill(out.row(i).begin() + static_cast<std::ptrdiff_t>(visible), out.row(i).end(),
              0.0);
  }
  return out;
}

std::array<Tap, 4> bilinear_taps(double x, double y, std::size_t height, std::size_t width) {
  const double cx = std::clamp(x, 0.0, static_cast<double>(width - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(cx));
  const auto y0 = static_cast<std::size_t>(std::floor(cy));
  const std::size_t x1 = std::min(x0 + 1, width - 1);
  const std::size_t y1 = std::min(y0 + 1, height - 1);
  const double fx = cx - static_cast<double>(x0);
  const double fy = cy - static_cast<double>(y0);
  return {{{y0 * width + x0, (1.0 - fx) * (1.0 - fy)},
           {y0 * width + x1, fx * (1.0 - fy)},
           {y1 * width + x0, (1.0 - fx) * fy},
           {y1 * width + x1, fx * fy}}};
}

Tensor bilinear_sample(const Tensor& field, std::span<const Point2> points) {
  if (field.rank() != 2 && field.rank() != 3) {
    throw std::invalid_argument("bilinear_sample: field must be h x w or h x w x C");
  }
  const std::size_t height = field.dim(0);
  const std::size_t width = field.dim(1);
  const std::size_t channels = field.rank() == 3 ? field.dim(2) : 1;
  Tensor out = Tensor::matrix(std::max<std::size_t>(points.size(), 1), channels);
  if (points.empty()) return Tensor();
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (const Tap& tap : bilinear_taps(points[p].x, points[p].y, height, width)) {
      for (std::size_t c = 0; c < channels; ++c) {
        out(p, c) += tap.weight * field[tap.index * channels + c];
      }
    }
  }
  return out;
}

Tensor minmax_normalize(const Tensor& map) {
  Tensor out(map.dims());
  const auto [lo, hi] = std::minmax_element(map.data().begin(), map.data().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = (map[i] - *lo) / range;
  return out;
}

SparseRows upsample_bilinear_operator(std::size_t height, std::size_t width,
                                      std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("upsample factor must be >= 1");
  const std::size_t out_h = height * factor;
  const std::size_t out_w = width * factor;
  const double inv = 1.0 / static_cast<double>(factor);
  SparseRows op;
  op.source_rows = height * width;
  op.rows.reserve(out_h * out_w);
  for (std::size_t v = 0; v < out_h; ++v) {
    const double sy = (static_cast<double>(v) + 0.5) * inv - 0.5;
    for (std::size_t u = 0; u < out_w; ++u) {
      const double sx = (static_cast<double>(u) + 0.5) * inv - 0.5;
      std::vector<Tap> taps;
      taps.reserve(4);
      for (const Tap& tap : bilinear_taps(sx, sy, height, width)) {
        if (tap.weight != 0.0) taps.push_back(tap);
      }
      op.rows.push_back(std::move(taps));
    }
  }
  return op;
}

Tensor upsample_bilinear(const Tensor& map, std::size_t factor) {
  require_matrix(map, "upsample_bilinear");
  const SparseRows op = upsample_bilinear_operator(map.dim(0), map.dim(1), factor);
  Tensor column = apply_sparse_rows(op, map.reshaped({map.size(), 1}));
  return column.reshaped({map.dim(0) * factor, map.dim(1) * factor});
}

Tensor nearest_resample(const Tensor& map, std::size_t out_height, std::size_t out_width) {
  require_matrix(map, "nearest_resample");
  const std::size_t in_h = map.dim(0);
  const std::size_t in_w = map.dim(1);
  Tensor out = Tensor::matrix(out_height, out_width);
  for (std::size_t v = 0; v < out_height; ++v) {
    const auto sy = std::min(in_h - 1, (2 * v + 1) * in_h / (2 * out_height));
    for (std::size_t u = 0; u < out_width; ++u) {
      const auto sx = std::min(in_w - 1, (2 * u + 1) * in_w / (2 * out_width));
      out(v, u) = map(sy, sx);
    }
  }
  return out;
}

Tensor apply_sparse_rows(const SparseRows& op, const Tensor& source) {
  require_matrix(source, "apply_sparse_rows");
  if (source.rows() != op.source_rows) {
    throw std::invalid_argument("apply_sparse_rows: operator expects " +
                                std::to_string(op.source_rows) + " source rows, got " +
                                std::to_string(source.rows()));
  }
  const std::size_t cols = source.cols();
  Tensor out = Tensor::matrix(op.rows.size(), cols);
  for (std::size_t r = 0; r < op.rows.size(); ++r) {
    double* dst = out.row(r).data();
    for (const Tap& tap : op.rows[r]) {
      const double* src = source.row(tap.index).data();
      for (std::size_t c = 0; c < cols; ++c) dst[c] += tap.weight * src[c];
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  add_matmul(out, a, b);
  return out;
}

void add_matmul(Tensor& out, const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k || out.rows() != n || out.cols() != m) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(a.dims()) +
                                " * " + shape_string(b.dims()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double* __restrict dst = out.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double s = arow[p];
      if (s == 0.0) continue;
      const double* __restrict brow = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) dst[j] += s * brow[j];
    }
  }
}

void add_matmul_nt(Tensor& out, const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k || out.rows() != n || out.cols() != m) {
    throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_string(a.dims()) +
                                " * " + shape_string(b.dims()) + "^T");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i).data();
    double* __restrict dst = out.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const double* __restrict brow = b.row(j).data();
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      dst[j] += acc;
    }
  }
}

void add_matmul_tn(Tensor& out, const Tensor& a, const Tensor& b) {
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  if (b.rows() != k || out.rows() != n || out.cols() != m) {
    throw std::invalid_argument("matmul_tn: incompatible shapes " + shape_string(a.dims()) +
                                "^T * " + shape_string(b.dims()));
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a.row(p).data();
    const double* __restrict brow = b.row(p).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = arow[i];
      if (s == 0.0) continue;
      double* __restrict dst = out.row(i).data();
      for (std::size_t j = 0; j < m; ++j) dst[j] += s * brow[j];
    }
  }
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out = Tensor::matrix(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

}  // namespace lens
