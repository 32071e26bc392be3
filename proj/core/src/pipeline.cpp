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

#include "lens/pipeline.hpp"

#include <memory>
#include <stdexcept>
#include <string>

#include "lens/rng.hpp"

namespace lens {
namespace {

bool never(const std::string&) { return false; }

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  if (grid_h == 0 || grid_w == 0) fail("grid must be non-empty");
  if (head_count == 0 || model_dim % head_count != 0) fail("d must be a multiple of head_count");
  if (prompt_dim % head_count != 0 || prompt_dim % 2 != 0) fail("d_s must be even and a multiple of head_count");
  if (max_points == 0) fail("m must be >= 1");
  if (!(nms_radius > 0.0)) fail("nms radius must be positive");
  if (window % 2 == 0) fail("window must be odd");
  if (!(refine_eps > 0.0)) fail("refinement epsilon must be positive");
  if (upsample_factor == 0) fail("upsample factor must be >= 1");
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model model;
  model.config = config;
  Rng rng(seed);
  model.weights.head = head::init_head(config.model_dim, config.head_count, rng, config.init_stddev).weights;
  model.weights.descriptor = descriptor::init_descriptor(config.model_dim, config.prompt_dim,
                                                         config.head_count, rng, config.init_stddev)
                                 .weights;
  model.weights.decoder =
      decoder::init_decoder(config.prompt_dim, config.head_count, rng, config.init_stddev).weights;
  model.weights.cls_position = gaussian({1, config.prompt_dim}, config.init_stddev, rng);
  model.positions = decoder::PositionEncoder(config.prompt_dim, config.position_seed);
  return model;
}

GraphOutputs forward_graph(const ModelWeights<ad::Var>& w, const Model& model,
                           const head::HeadInput& input, const decoder::ImageEmbedding& image,
                           const ForwardOptions& options) {
  const ModelConfig& cfg = model.config;
  input.validate();
  if (input.grid_h != cfg.grid_h || input.grid_w != cfg.grid_w) {
    throw std::invalid_argument("head input grid does not match the model grid");
  }
  if (input.image_features.cols() != cfg.model_dim) {
    throw std::invalid_argument("feature dim " + std::to_string(input.image_features.cols()) +
                                " does not match model dim " + std::to_string(cfg.model_dim));
  }
  ad::Tape& tape = w.cls_position.tape();
  GraphOutputs out;
  out.head = head::head_forward(w.head, cfg.head_count, tape.constant(input.concatenated()),
                                input.image_length());

  const Tensor heatmap = out.head.grounding.value().reshaped({cfg.grid_h, cfg.grid_w});
  if (options.fixed_keypoints) {
    out.keypoints = *options.fixed_keypoints;
  } else {
    out.keypoints = keypoint::subpixel_refine(
        heatmap, keypoint::nms_extract(heatmap, cfg.nms_radius, cfg.max_points), cfg.refine_eps);
  }

  const std::size_t m = out.keypoints.size();
  const bool with_locals = options.use_locals && m > 0;
  ad::Var locals;
  if (with_locals) {
    auto sampling = std::make_shared<const SparseRows>(
        keypoint::neighborhood_operator(out.keypoints, cfg.grid_h, cfg.grid_w, cfg.window));
    ad::Var image_rows = ad::slice_rows(out.head.enhanced, 0, input.image_length());
    ad::Var neighborhoods = ad::gather(sampling, image_rows);
    locals = descriptor::describe_keypoints(w.descriptor, out.head.start_feature, neighborhoods, m,
                                            cfg.window * cfg.window);
  }
  out.descriptors = descriptor::global_refine(w.descriptor, cfg.head_count,
                                              out.head.start_feature, locals);

  ad::Var prompt_positions = w.cls_position;
  if (with_locals) {
    const Tensor encoded = decoder::encode_positions(model.positions, out.keypoints, cfg.grid_h,
                                                     cfg.grid_w, model.weights.cls_position);
    const ad::Var parts[] = {w.cls_position, tape.constant(Tensor(
                                                 {m, cfg.prompt_dim},
                                                 {encoded.data().begin() +
                                                      static_cast<std::ptrdiff_t>(cfg.prompt_dim),
                                                  encoded.data().end()}))};
    prompt_positions = ad::concat_rows(parts);
  }
  ad::Var tokens = ad::add(out.descriptors, prompt_positions);

  if (image.features.rank() != 3 || image.dim() != cfg.prompt_dim) {
    throw std::invalid_argument("image embedding must be h_e x w_e x d_s");
  }
  const std::size_t f = cfg.upsample_factor;
  auto upsample = std::make_shared<const SparseRows>(
      upsample_bilinear_operator(image.height(), image.width(), f));
  out.logits = decoder::decode_mask(
      w.decoder, cfg.head_count, tokens, tape.constant(image.flattened()),
      tape.constant(decoder::dense_positions(model.positions, image.height(), image.width())),
      upsample, f * image.height(), f * image.width());
  return out;
}

LossGraph loss_graph(const GraphOutputs& outputs, const Model& model, const Tensor& mask,
                     const ForwardOptions& options) {
  const ModelConfig& cfg = model.config;
  options.loss.validate();
  if (mask.rank() != 2) throw std::invalid_argument("ground-truth mask must be a matrix");
  const Tensor& logits = outputs.logits.value();
  const Tensor target = nearest_resample(mask, logits.dim(0), logits.dim(1));
  const Tensor target_small =
      nearest_resample(mask, cfg.grid_h, cfg.grid_w).reshaped({1, cfg.grid_h * cfg.grid_w});

  ad::Var grounding = outputs.head.grounding;
  if (options.normalize_attention) grounding = ad::minmax_normalize(grounding);
  auto attention = objectives::binary_cross_entropy(grounding.value(), target_small,
                                                    options.loss.clamp_eps);

  ad::Var probabilities = ad::sigmoid(outputs.logits);
  auto dice = objectives::soft_dice(probabilities.value(), target, options.loss.dice_smooth);
  auto bce = objectives::binary_cross_entropy_logits(outputs.logits.value(), target,
                                                     options.loss.clamp_eps);

  LossGraph g;
  g.record.attention = attention.value;
  g.record.dice = dice.value;
  g.record.bce = bce.value;
  g.record.seg = options.loss.lambda_dice * dice.value + options.loss.lambda_bce * bce.value;
  g.record.total = g.record.seg + g.record.attention;

  const ad::Var terms[] = {
      ad::scalar_function(grounding, attention.value, std::move(attention.gradient)),
      ad::scalar_function(probabilities, dice.value, std::move(dice.gradient)),
      ad::scalar_function(outputs.logits, bce.value, std::move(bce.gradient))};
  const double s = options.loss_scale;
  const double weights[] = {s, s * options.loss.lambda_dice, s * options.loss.lambda_bce};
  g.total = ad::weighted_sum(terms, weights);
  return g;
}

PipelineOutput run_pipeline(const Model& model, const head::HeadInput& input,
                            const decoder::ImageEmbedding& image) {
  ad::Tape tape;
  auto w = bind_weights(tape, model.weights, never);
  ForwardOptions options;
  options.use_locals = true;
  GraphOutputs g = forward_graph(w, model, input, image, options);
  PipelineOutput out;
  out.head.grounding = g.head.grounding.value().reshaped({input.grid_h, input.grid_w});
  out.head.enhanced = g.head.enhanced.value();
  out.head.start_feature = g.head.start_feature.value();
  out.keypoints = g.keypoints;
  out.descriptors = {g.descriptors.value(), g.keypoints.size()};
  out.mask = {g.logits.value()};
  return out;
}

LossRecord evaluate_loss(const Model& model, const Sample& sample, const ForwardOptions& options) {
  ad::Tape tape;
  auto w = bind_weights(tape, model.weights, never);
  GraphOutputs g = forward_graph(w, model, sample.input, sample.image, options);
  return loss_graph(g, model, sample.mask, options).record;
}

}  // namespace lens
