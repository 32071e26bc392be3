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
#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "lens/autodiff.hpp"
#include "lens/descriptor.hpp"
#include "lens/keypoint.hpp"
#include "lens/layers.hpp"
#include "lens/rng.hpp"
#include "lens/tensor.hpp"

namespace lens::decoder {

/// Random Fourier point encoder: [sin(2 pi c B), cos(2 pi c B)] for
/// c in [0, 1]^2 and a fixed 2 x (d_s / 2) Gaussian matrix B.
class PositionEncoder {
 public:
  PositionEncoder() = default;
  PositionEncoder(std::size_t dim, std::uint64_t seed, double scale = 1.0);

  std::size_t dim() const { return 2 * frequencies_.cols(); }
  const Tensor& frequencies() const { return frequencies_; }

  /// Encodes already-normalized coordinates, one row per point.
  Tensor encode(std::span<const Point2> normalized) const;

 private:
  Tensor frequencies_;
};

/// Prompt positions: row 0 is cls_position, then one encoded row per point.
/// Points are normalized by (w - 1, h - 1) and clamped to [0, 1].
Tensor encode_positions(const PositionEncoder& encoder, const keypoint::KeypointSet& points,
                        std::size_t grid_h, std::size_t grid_w, const Tensor& cls_position);

/// Encodings of every cell centre of an h x w grid, (h * w) x d_s.
Tensor dense_positions(const PositionEncoder& encoder, std::size_t height, std::size_t width);

/// D + P^pos, the decoder's sparse prompt tokens.
struct PromptBundle {
  Tensor tokens;  // (m + 1) x d_s
};

PromptBundle make_prompt_bundle(const descriptor::DescriptorSet& descriptors,
                                const Tensor& positions);

enum class EmbeddingSource { kStubEncoder, kFile };

struct ImageEmbedding {
  Tensor features;  // h_e x w_e x d_s
  EmbeddingSource source = EmbeddingSource::kStubEncoder;

  std::size_t height() const { return features.dim(0); }
  std::size_t width() const { return features.dim(1); }
  std::size_t dim() const { return features.dim(2); }
  /// (h_e * w_e) x d_s view of the features.
  Tensor flattened() const { return features.reshaped({height() * width(), dim()}); }
};

/// Frozen stand-in for the promptable-segmentation image encoder: a fixed
/// random linear map from each patch x patch x C block to d_s.
class PatchEncoder {
 public:
  PatchEncoder(std::size_t patch, std::size_t channels, std::size_t dim, std::uint64_t seed);

  /// image is H x W x C with H, W multiples of the patch size.
  ImageEmbedding encode(const Tensor& image) const;
  std::size_t patch() const { return patch_; }

 private:
  std::size_t patch_;
  std::size_t channels_;
  Tensor projection_;  // (patch * patch * C) x d_s
};

/// One two-way block: token self-attention, tokens -> image, token MLP,
/// image -> tokens. All sub-layers are pre-norm with residuals.
template <class T>
struct TwoWayBlockWeights {
  NormWeights<T> self_norm;
  AttentionWeights<T> self_attn;
  NormWeights<T> cross_norm;
  AttentionWeights<T> token_to_image;
  NormWeights<T> ffn_norm;
  FeedForwardWeights<T> ffn;
  NormWeights<T> image_norm;
  AttentionWeights<T> image_to_token;

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    s.self_norm.visit(f, p + "self_norm.");
    s.self_attn.visit(f, p + "self_attn.");
    s.cross_norm.visit(f, p + "cross_norm.");
    s.token_to_image.visit(f, p + "token_to_image.");
    s.ffn_norm.visit(f, p + "ffn_norm.");
    s.ffn.visit(f, p + "ffn.");
    s.image_norm.visit(f, p + "image_norm.");
    s.image_to_token.visit(f, p + "image_to_token.");
  }
};

template <class T>
struct DecoderWeights {
  T mask_token;  // 1 x d_s
  TwoWayBlockWeights<T> block1;
  TwoWayBlockWeights<T> block2;
  T mask_projection;       // d_s x d_s
  T mask_projection_bias;  // 1 x d_s

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    f(p + "mask_token", s.mask_token);
    s.block1.visit(f, p + "block1.");
    s.block2.visit(f, p + "block2.");
    f(p + "mask_projection", s.mask_projection);
    f(p + "mask_projection_bias", s.mask_projection_bias);
  }
};

inline constexpr std::size_t kDefaultUpsample = 4;

struct DecoderParams {
  std::size_t head_count = 4;
  std::size_t upsample_factor = kDefaultUpsample;
  DecoderWeights<Tensor> weights;

  std::size_t dim() const { return weights.mask_token.cols(); }
};

DecoderParams init_decoder(std::size_t dim, std::size_t head_count, Rng& rng,
                           double stddev = 0.02);

struct MaskLogits {
  Tensor logits;  // (factor * h_e) x (factor * w_e), pre-sigmoid
};

MaskLogits decode_mask(const DecoderParams& params, const PromptBundle& bundle,
                       const ImageEmbedding& image, const PositionEncoder& encoder);

/// Differentiable decoder. `image` is (h_e * w_e) x d_s, `image_pe` its
/// dense positions, `upsample` the operator to output resolution. Returns
/// logits as an H_out x W_out matrix.
ad::Var decode_mask(const DecoderWeights<ad::Var>& w, std::size_t head_count, ad::Var tokens,
                    ad::Var image, ad::Var image_pe,
                    const std::shared_ptr<const SparseRows>& upsample, std::size_t out_h,
                    std::size_t out_w);

}  // namespace lens::decoder
