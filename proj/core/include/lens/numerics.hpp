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

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "lens/tensor.hpp"

namespace lens {

/// Additive mask value standing in for -inf. Masked outputs are forced to
/// exactly zero after normalization, so the sentinel never reaches exp().
inline constexpr double kMaskSentinel = -1e30;

/// Continuous (x, y) position: x is the column, y the row.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// One source element of an interpolation: flat index into the source rows
/// and its weight.
struct Tap {
  std::size_t index = 0;
  double weight = 0.0;
};

/// A constant linear operator expressed as weighted sums of source rows.
/// Output row r is sum over rows[r] of weight * source.row(index).
struct SparseRows {
  std::size_t source_rows = 0;
  std::vector<std::vector<Tap>> rows;
};

/// L x L mask with 0 on and below the diagonal and kMaskSentinel above it.
Tensor causal_mask(std::size_t length);

/// Row-wise softmax of logits + additive_mask. Positions whose mask entry is
/// at or below half the sentinel come out exactly 0. Throws
/// std::domain_error("degenerate attention row") if a row is fully masked.
Tensor softmax_masked(const Tensor& logits, const Tensor& additive_mask);

/// Row-wise softmax, optionally causal (column j > row i masked).
Tensor softmax_rows(const Tensor& logits, bool causal);

/// The four align-corners bilinear taps for (x, y) on an h x w grid, with
/// the coordinate clamped to [0, w-1] x [0, h-1] first. Indices are flat
/// row-major cell indices (y * w + x).
std::array<Tap, 4> bilinear_taps(double x, double y, std::size_t height, std::size_t width);

/// Samples an h x w (one channel) or h x w x C field at each point.
/// Returns an n x C matrix, one row per point.
Tensor bilinear_sample(const Tensor& field, std::span<const Point2> points);

/// Affine rescale to [0, 1]; constant input maps to all zeros.
Tensor minmax_normalize(const Tensor& map);

/// Half-pixel bilinear upsampling of an h x w grid by an integer factor, as
/// a sparse operator from h*w source rows to (factor*h)*(factor*w) rows.
SparseRows upsample_bilinear_operator(std::size_t height, std::size_t width,
                                      std::size_t factor);

/// Upsamples an h x w map by `factor` with the operator above.
Tensor upsample_bilinear(const Tensor& map, std::size_t factor);

/// Nearest-neighbour resample of an h x w map to out_h x out_w using
/// half-pixel centres. Preserves binary values.
Tensor nearest_resample(const Tensor& map, std::size_t out_height, std::size_t out_width);

/// Applies a SparseRows operator to the rows of a matrix.
Tensor apply_sparse_rows(const SparseRows& op, const Tensor& source);

// Dense kernels on rank-2 tensors. The add_* forms accumulate into `out`.
Tensor matmul(const Tensor& a, const Tensor& b);
void add_matmul(Tensor& out, const Tensor& a, const Tensor& b);     // out += a b
void add_matmul_nt(Tensor& out, const Tensor& a, const Tensor& b);  // out += a b^T
void add_matmul_tn(Tensor& out, const Tensor& a, const Tensor& b);  // out += a^T b
Tensor transpose(const Tensor& a);

}  // namespace lens
