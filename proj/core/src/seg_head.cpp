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

#include "lens/seg_head.hpp"

#include <stdexcept>
#include <string>

namespace lens::head {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

const BlockWeights<Tensor>& layer_weights(const HeadParameters& params, int layer_index) {
  switch (layer_index) {
    case 1:
      return params.weights.layer1;
    case 2:
      return params.weights.layer2;
    default:
      throw std::invalid_argument("layer_index must be 1 or 2, got " +
                                  std::to_string(layer_index));
  }
}

}  // namespace

void HeadParameters::validate() const {
  const std::size_t d = model_dim();
  require(d > 0 && head_count > 0 && d % head_count == 0,
          "model dim must be a positive multiple of head_count");
  auto check = [&](const std::string& name, const Tensor& t) {
    require(t.all_finite(), "non-finite entry in head parameter " + name);
  };
  weights.visit(check);
  for (const BlockWeights<Tensor>* block : {&weights.layer1, &weights.layer2}) {
    for (const Tensor* proj : {&block->attn.query, &block->attn.key, &block->attn.value,
                               &block->attn.output}) {
      require(proj->dims() == std::vector<std::size_t>{d, d}, "attention projections must be d x d");
    }
    require(block->ffn.in.dims() == std::vector<std::size_t>{d, 4 * d} &&
                block->ffn.out.dims() == std::vector<std::size_t>{4 * d, d},
            "feed-forward must be d x 4d and 4d x d");
  }
}

HeadParameters init_head(std::size_t model_dim, std::size_t head_count, Rng& rng, double stddev) {
  HeadParameters params;
  params.head_count = head_count;
  params.weights.layer1 = init_block(model_dim, stddev, rng);
  params.weights.layer2 = init_block(model_dim, stddev, rng);
  params.validate();
  return params;
}

void HeadInput::validate() const {
  require(image_features.rank() == 2 && text_features.rank() == 2,
          "head input features must be matrices");
  require(image_features.cols() == text_features.cols(),
          "image and text features must share the model dim");
  require(grid_h * grid_w == image_features.rows(),
          "grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
              " does not match " + std::to_string(image_features.rows()) + " image tokens");
}

Tensor HeadInput::concatenated() const {
  validate();
  std::vector<double> data(image_features.data().begin(), image_features.data().end());
  data.insert(data.end(), text_features.data().begin(), text_features.data().end());
  return Tensor({total_length(), image_features.cols()}, std::move(data));
}

LayerOutput layer_forward(const HeadParameters& params, int layer_index, const Tensor& hidden_in) {
  const BlockWeights<Tensor>& block = layer_weights(params, layer_index);
  require(hidden_in.rank() == 2 && hidden_in.cols() == params.model_dim(),
          "layer input must be L x " + std::to_string(params.model_dim()));
  ad::Tape tape;
  auto w = bind_weights(tape, block, [](const std::string&) { return false; });
  layers::BlockResult r =
      layers::transformer_block(w, tape.constant(hidden_in), params.head_count, /*causal=*/true);
  return {r.mean_probabilities.value(), r.hidden.value()};
}

Tensor aggregate_text_to_image(const Tensor& attention, std::size_t image_length,
                               std::size_t text_length, std::size_t grid_h, std::size_t grid_w) {
  const std::size_t total = image_length + text_length;
  require(attention.rank() == 2 && attention.rows() == total && attention.cols() == total,
          "attention must be L x L with L = L_i + L_t");
  require(text_length >= 1, "at least one text row is required");
  require(grid_h * grid_w == image_length, "grid does not match L_i");
  Tensor out = Tensor::matrix(grid_h, grid_w);
  for (std::size_t k = image_length; k < total; ++k) {
    for (std::size_t q = 0; q < image_length; ++q) out[q] += attention(k, q);
  }
  for (double& v : out.data()) v /= static_cast<double>(text_length);
  return out;
}

HeadOutput head_forward(const HeadParameters& params, const HeadInput& input) {
  input.validate();
  require(input.image_features.cols() == params.model_dim(), "feature dim does not match head");
  ad::Tape tape;
  auto w = bind_weights(tape, params.weights, [](const std::string&) { return false; });
  HeadGraph g = head_forward(w, params.head_count, tape.constant(input.concatenated()),
                             input.image_length());
  HeadOutput out;
  out.grounding = g.grounding.value().reshaped({input.grid_h, input.grid_w});
  out.enhanced = g.enhanced.value();
  out.start_feature = g.start_feature.value();
  return out;
}

HeadGraph head_forward(const HeadWeights<ad::Var>& weights, std::size_t head_count,
                       ad::Var hidden_in, std::size_t image_length) {
  const std::size_t total = hidden_in.value().rows();
  require(image_length >= 1 && image_length < total, "need at least one image and one text row");
  layers::BlockResult first = layers::transformer_block(weights.layer1, hidden_in, head_count, true);
  layers::BlockResult second =
      layers::transformer_block(weights.layer2, first.hidden, head_count, true);
  HeadGraph g;
  g.attention = first.mean_probabilities;
  g.grounding = aggregate_text_to_image(first.mean_probabilities, image_length);
  g.enhanced = second.hidden;
  g.start_feature = ad::slice_rows(second.hidden, total - 1, total);
  return g;
}

ad::Var aggregate_text_to_image(ad::Var attention, std::size_t image_length) {
  const std::size_t total = attention.value().rows();
  ad::Var text_rows = ad::slice_rows(attention, image_length, total);
  return ad::mean_rows(ad::slice_cols(text_rows, 0, image_length));
}

}  // namespace lens::head
