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
#include <functional>
#include <string>

#include "lens/autodiff.hpp"
#include "lens/descriptor.hpp"
#include "lens/keypoint.hpp"
#include "lens/objectives.hpp"
#include "lens/prompt_decoder.hpp"
#include "lens/seg_head.hpp"

// Composition of the head, keypoint stage, descriptor model and mask
// decoder into one model, evaluated on a tape so the same code path serves
// inference and training.
namespace lens {

struct ModelConfig {
  std::size_t grid_h = 24;
  std::size_t grid_w = 24;
  std::size_t model_dim = 32;   // d
  std::size_t prompt_dim = 32;  // d_s
  std::size_t head_count = 4;
  std::size_t max_points = keypoint::kDefaultMaxPoints;  // m
  double nms_radius = keypoint::kDefaultRadius;
  std::size_t window = keypoint::kDefaultWindow;
  double refine_eps = keypoint::kDefaultEpsilon;
  std::size_t upsample_factor = decoder::kDefaultUpsample;
  double init_stddev = 0.02;
  std::uint64_t position_seed = 0x5eed;

  void validate() const;
};

template <class T>
struct ModelWeights {
  head::HeadWeights<T> head;
  descriptor::DescriptorWeights<T> descriptor;
  decoder::DecoderWeights<T> decoder;
  T cls_position;  // 1 x d_s, positional part of the global prompt token

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    s.head.visit(f, p + "head.");
    s.descriptor.visit(f, p + "descriptor.");
    s.decoder.visit(f, p + "decoder.");
    f(p + "prompt.cls_position", s.cls_position);
  }
};

struct Model {
  ModelConfig config;
  ModelWeights<Tensor> weights;
  decoder::PositionEncoder positions;

  head::HeadParameters head_parameters() const { return {config.head_count, weights.head}; }
  descriptor::DescriptorParams descriptor_parameters() const {
    return {config.head_count, weights.descriptor};
  }
  decoder::DecoderParams decoder_parameters() const {
    return {config.head_count, config.upsample_factor, weights.decoder};
  }
};

Model init_model(const ModelConfig& config, std::uint64_t seed);

/// One supervised example: backbone features, image embedding and a binary
/// ground-truth mask at any resolution (resampled by nearest neighbour).
struct Sample {
  head::HeadInput input;
  decoder::ImageEmbedding image;
  Tensor mask;
  Tensor pixels;  // optional H x W x C source image, used for overlays
};

struct ForwardOptions {
  bool use_locals = true;
  /// When set, these keypoints replace NMS + refinement.
  const keypoint::KeypointSet* fixed_keypoints = nullptr;
  bool normalize_attention = false;
  objectives::LossWeights loss;
  double loss_scale = 1.0;
};

struct GraphOutputs {
  head::HeadGraph head;
  keypoint::KeypointSet keypoints;
  ad::Var descriptors;  // (m + 1) x d_s, or 1 x d_s on the global-only path
  ad::Var logits;       // H_out x W_out
};

struct LossRecord {
  double total = 0.0;
  double attention = 0.0;
  double seg = 0.0;
  double dice = 0.0;
  double bce = 0.0;
};

struct LossGraph {
  ad::Var total;
  LossRecord record;
};

using TrainablePredicate = std::function<bool(const std::string&)>;

/// Full forward pass on a tape. Keypoints come from the grounding map's
/// values and carry no gradient.
GraphOutputs forward_graph(const ModelWeights<ad::Var>& w, const Model& model,
                           const head::HeadInput& input, const decoder::ImageEmbedding& image,
                           const ForwardOptions& options);

/// Attention loss on the grounding map plus Dice/BCE on the mask.
LossGraph loss_graph(const GraphOutputs& outputs, const Model& model, const Tensor& mask,
                     const ForwardOptions& options);

struct PipelineOutput {
  head::HeadOutput head;
  keypoint::KeypointSet keypoints;
  descriptor::DescriptorSet descriptors;
  decoder::MaskLogits mask;
};

/// Inference: both local and global descriptions are always used.
PipelineOutput run_pipeline(const Model& model, const head::HeadInput& input,
                            const decoder::ImageEmbedding& image);

/// Loss of the model on one sample without building gradients.
LossRecord evaluate_loss(const Model& model, const Sample& sample, const ForwardOptions& options);

}  // namespace lens
