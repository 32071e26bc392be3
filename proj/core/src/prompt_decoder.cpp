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

#include "lens/prompt_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace lens::decoder {

PositionEncoder::PositionEncoder(std::size_t dim, std::uint64_t seed, double scale) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("position encoding dim must be even");
  Rng rng(seed);
  frequencies_ = gaussian({2, dim / 2}, scale, rng);
}

Tensor PositionEncoder::encode(std::span<const Point2> normalized) const {
  const std::size_t half = frequencies_.cols();
  Tensor out = Tensor::matrix(std::max<std::size_t>(normalized.size(), 1), 2 * half);
  if (normalized.empty()) return Tensor();
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = 2.0 * std::numbers::pi *
                           (normalized[i].x * frequencies_(0, k) + normalized[i].y * frequencies_(1, k));
      out(i, k) = std::sin(angle);
      out(i, half + k) = std::cos(angle);
    }
  }
  return out;
}

Tensor encode_positions(const PositionEncoder& encoder, const keypoint::KeypointSet& points,
                        std::size_t grid_h, std::size_t grid_w, const Tensor& cls_position) {
  const std::size_t dim = encoder.dim();
  if (cls_position.size() != dim) throw std::invalid_argument("cls_position must have d_s entries");
  std::vector<Point2> normalized;
  normalized.reserve(points.size());
  const double sx = grid_w > 1 ? static_cast<double>(grid_w - 1) : 1.0;
  const double sy = grid_h > 1 ? static_cast<double>(grid_h - 1) : 1.0;
  for (const keypoint::Keypoint& p : points) {
    normalized.push_back({std::clamp(p.x / sx, 0.0, 1.0), std::clamp(p.y / sy, 0.0, 1.0)});
  }
  std::vector<double> data(cls_position.data().begin(), cls_position.data().end());
  if (!normalized.empty()) {
    const Tensor encoded = encoder.encode(normalized);
    data.insert(data.end(), encoded.data().begin(), encoded.data().end());
  }
  return Tensor({points.size() + 1, dim}, std::move(data));
}

Tensor dense_positions(const PositionEncoder& encoder, std::size_t height, std::size_t width) {
  std::vector<Point2> cells;
  cells.reserve(height * width);
  const double sx = width > 1 ? static_cast<double>(width - 1) : 1.0;
  const double sy = height > 1 ? static_cast<double>(height - 1) : 1.0;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      cells.push_back({static_cast<double>(j) / sx, static_cast<double>(i) / sy});
    }
  }
  return encoder.encode(cells);
}

PromptBundle make_prompt_bundle(const descriptor::DescriptorSet& descriptors,
                                const Tensor& positions) {
  Tensor tokens = descriptors.descriptors;
  const std::size_t rows = tokens.rows();
  if (positions.rank() != 2 || positions.rows() < rows || positions.cols() != tokens.cols()) {
    throw std::invalid_argument("prompt positions " + shape_string(positions.dims()) +
                                " do not cover descriptors " + shape_string(tokens.dims()));
  }
  // Under the global-only path D has one row; only the CLS position applies.
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] += positions[i];
  return {std::move(tokens)};
}

PatchEncoder::PatchEncoder(std::size_t patch, std::size_t channels, std::size_t dim,
                           std::uint64_t seed)
    : patch_(patch), channels_(channels) {
  if (patch == 0 || channels == 0 || dim == 0) throw std::invalid_argument("bad patch encoder shape");
  Rng rng(seed);
  const std::size_t fan_in = patch * patch * channels;
  projection_ = gaussian({fan_in, dim}, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

ImageEmbedding PatchEncoder::encode(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(2) != channels_ || image.dim(0) % patch_ != 0 ||
      image.dim(1) % patch_ != 0) {
    throw std::invalid_argument("patch encoder: image " + shape_string(image.dims()) +
                                " is not H x W x C with patch-aligned H, W");
  }
  const std::size_t gh = image.dim(0) / patch_, gw = image.dim(1) / patch_;
  const std::size_t fan_in = projection_.rows();
  Tensor patches = Tensor::matrix(gh * gw, fan_in);
  for (std::size_t py = 0; py < gh; ++py) {
    for (std::size_t px = 0; px < gw; ++px) {
      std::size_t k = 0;
      for (std::size_t dy = 0; dy < patch_; ++dy) {
        for (std::size_t dx = 0; dx < patch_; ++dx) {
          for (std::size_t c = 0; c < channels_; ++c) {
            patches(py * gw + px, k++) = image(py * patch_ + dy, px * patch_ + dx, c);
          }
        }
      }
    }
  }
  Tensor flat = matmul(patches, projection_);
  return {flat.reshaped({gh, gw, projection_.cols()}), EmbeddingSource::kStubEncoder};
}

namespace {

TwoWayBlockWeights<Tensor> init_two_way_block(std::size_t dim, double stddev, Rng& rng) {
  TwoWayBlockWeights<Tensor> w;
  w.self_norm = init_norm(dim);
  w.self_attn = init_attention(dim, stddev, rng);
  w.cross_norm = init_norm(dim);
  w.token_to_image = init_attention(dim, stddev, rng);
  w.ffn_norm = init_norm(dim);
  w.ffn = init_feed_forward(dim, 4 * dim, stddev, rng);
  w.image_norm = init_norm(dim);
  w.image_to_token = init_attention(dim, stddev, rng);
  return w;
}

ad::Var two_way_block(const TwoWayBlockWeights<ad::Var>& w, std::size_t heads, ad::Var& tokens,
                      ad::Var image, ad::Var image_pe) {
  ad::Var n = layers::norm(w.self_norm, tokens);
  tokens = ad::add(tokens, layers::attention(w.self_attn, n, n, n, heads, false).output);

  n = layers::norm(w.cross_norm, tokens);
  tokens = ad::add(tokens, layers::attention(w.token_to_image, n, ad::add(image, image_pe), image,
                                             heads, false)
                               .output);

  tokens = ad::add(tokens, layers::feed_forward(w.ffn, layers::norm(w.ffn_norm, tokens)));

  ad::Var queries = ad::add(layers::norm(w.image_norm, image), image_pe);
  return ad::add(image,
                 layers::attention(w.image_to_token, queries, tokens, tokens, heads, false).output);
}

}  // namespace

DecoderParams init_decoder(std::size_t dim, std::size_t head_count, Rng& rng, double stddev) {
  if (head_count == 0 || dim % head_count != 0) {
    throw std::invalid_argument("decoder: d_s must be a multiple of head_count");
  }
  DecoderParams params;
  params.head_count = head_count;
  params.weights.mask_token = gaussian({1, dim}, stddev, rng);
  params.weights.block1 = init_two_way_block(dim, stddev, rng);
  params.weights.block2 = init_two_way_block(dim, stddev, rng);
  params.weights.mask_projection = gaussian({dim, dim}, stddev, rng);
  params.weights.mask_projection_bias = Tensor::matrix(1, dim);
  return params;
}

MaskLogits decode_mask(const DecoderParams& params, const PromptBundle& bundle,
                       const ImageEmbedding& image, const PositionEncoder& encoder) {
  const std::size_t dim = params.dim();
  if (bundle.tokens.rank() != 2 || bundle.tokens.rows() < 1 || bundle.tokens.cols() != dim ||
      image.features.rank() != 3 || image.dim() != dim || encoder.dim() != dim) {
    throw std::invalid_argument("decode_mask: prompt, image and encoder dims must all equal d_s");
  }
  const std::size_t f = params.upsample_factor;
  ad::Tape tape;
  auto w = bind_weights(tape, params.weights, [](const std::string&) { return false; });
  auto upsample = std::make_shared<const SparseRows>(
      upsample_bilinear_operator(image.height(), image.width(), f));
  ad::Var logits = decode_mask(w, params.head_count, tape.constant(bundle.tokens),
                               tape.constant(image.flattened()),
                               tape.constant(dense_positions(encoder, image.height(), image.width())),
                               upsample, f * image.height(), f * image.width());
  return {logits.value()};
}

ad::Var decode_mask(const DecoderWeights<ad::Var>& w, std::size_t head_count, ad::Var tokens,
                    ad::Var image, ad::Var image_pe,
                    const std::shared_ptr<const SparseRows>& upsample, std::size_t out_h,
                    std::size_t out_w) {
  if (tokens.value().cols() != image.value().cols()) {
    throw std::invalid_argument("decode_mask: token and image dims differ");
  }
  const ad::Var parts[] = {w.mask_token, tokens};
  ad::Var all_tokens = ad::concat_rows(parts);
  ad::Var features = image;
  features = two_way_block(w.block1, head_count, all_tokens, features, image_pe);
  features = two_way_block(w.block2, head_count, all_tokens, features, image_pe);

  ad::Var mask_token = ad::slice_rows(all_tokens, 0, 1);
  ad::Var projected = ad::add_row(ad::matmul(mask_token, w.mask_projection), w.mask_projection_bias);
  // Upsampling is linear, so the per-pixel dot product can run at cell
  // resolution and be upsampled afterwards.
  ad::Var cell_logits = ad::matmul_nt(features, projected);  // (h_e * w_e) x 1
  return ad::reshape(ad::gather(upsample, cell_logits), {out_h, out_w});
}

}  // namespace lens::decoder
