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

#include "lens/descriptor.hpp"

#include <cmath>
#include <stdexcept>

namespace lens::descriptor {
namespace {

auto frozen() {
  return [](const std::string&) { return false; };
}

Tensor as_row(const Tensor& v) { return v.reshaped({1, v.size()}); }

}  // namespace

DescriptorParams init_descriptor(std::size_t model_dim, std::size_t prompt_dim,
                                 std::size_t head_count, Rng& rng, double stddev) {
  if (head_count == 0 || model_dim % head_count != 0) {
    throw std::invalid_argument("descriptor: model dim must be a multiple of head_count");
  }
  DescriptorParams params;
  params.head_count = head_count;
  params.weights.cross = init_attention(model_dim, stddev, rng);
  params.weights.refine = init_block(model_dim, stddev, rng);
  params.weights.projection = gaussian({model_dim, prompt_dim}, stddev, rng);
  params.weights.projection_bias = Tensor::matrix(1, prompt_dim);
  return params;
}

std::vector<Tensor> describe_keypoints(const DescriptorParams& params, const Tensor& start_feature,
                                       const std::vector<Tensor>& neighborhoods) {
  if (neighborhoods.empty()) return {};
  const std::size_t group = neighborhoods.front().rows();
  std::vector<double> stacked;
  for (const Tensor& n : neighborhoods) {
    if (n.rank() != 2 || n.rows() != group || n.cols() != params.model_dim()) {
      throw std::invalid_argument("describe_keypoints: neighbourhoods must share one g x d shape");
    }
    stacked.insert(stacked.end(), n.data().begin(), n.data().end());
  }
  ad::Tape tape;
  auto w = bind_weights(tape, params.weights, frozen());
  ad::Var out = describe_keypoints(
      w, tape.constant(as_row(start_feature)),
      tape.constant(Tensor({neighborhoods.size() * group, params.model_dim()}, std::move(stacked))),
      neighborhoods.size(), group);
  std::vector<Tensor> result;
  result.reserve(neighborhoods.size());
  for (std::size_t k = 0; k < neighborhoods.size(); ++k) {
    result.push_back(Tensor::row_vector(
        {out.value().row(k).begin(), out.value().row(k).end()}));
  }
  return result;
}

DescriptorSet global_refine(const DescriptorParams& params, const Tensor& start_feature,
                            const std::vector<Tensor>& locals, bool use_locals) {
  ad::Tape tape;
  auto w = bind_weights(tape, params.weights, frozen());
  ad::Var local_rows;
  const bool with_locals = use_locals && !locals.empty();
  if (with_locals) {
    std::vector<double> stacked;
    for (const Tensor& l : locals) {
      if (l.size() != params.model_dim()) throw std::invalid_argument("global_refine: bad local dim");
      stacked.insert(stacked.end(), l.data().begin(), l.data().end());
    }
    local_rows = tape.constant(Tensor({locals.size(), params.model_dim()}, std::move(stacked)));
  }
  ad::Var out = global_refine(w, params.head_count, tape.constant(as_row(start_feature)), local_rows);
  return {out.value(), with_locals ? locals.size() : 0};
}

ad::Var describe_keypoints(const DescriptorWeights<ad::Var>& w, ad::Var start_feature,
                           ad::Var neighborhoods, std::size_t count, std::size_t group) {
  if (count == 0) return {};
  if (neighborhoods.value().rows() != count * group) {
    throw std::invalid_argument("describe_keypoints: expected count * group neighbourhood rows");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(start_feature.value().cols()));
  ad::Var query = ad::matmul(start_feature, w.cross.query);  // 1 x d
  ad::Var keys = ad::matmul(neighborhoods, w.cross.key);
  ad::Var values = ad::matmul(neighborhoods, w.cross.value);
  // Scores for all samples, regrouped so each keypoint normalizes on its own row.
  ad::Var scores = ad::scale(ad::matmul_nt(query, keys), inv_sqrt);  // 1 x count*group
  ad::Var weights = ad::softmax(ad::reshape(scores, {count, group}), false);
  std::vector<ad::Var> contexts;
  contexts.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    contexts.push_back(ad::matmul(ad::slice_rows(weights, k, k + 1),
                                  ad::slice_rows(values, k * group, (k + 1) * group)));
  }
  ad::Var context = count == 1 ? contexts.front() : ad::concat_rows(contexts);
  return ad::add_row(ad::matmul(context, w.cross.output), query);
}

ad::Var global_refine(const DescriptorWeights<ad::Var>& w, std::size_t head_count,
                      ad::Var start_feature, ad::Var locals) {
  ad::Var tokens = start_feature;
  if (locals.valid()) {
    const ad::Var parts[] = {start_feature, locals};
    tokens = ad::concat_rows(parts);
  }
  layers::BlockResult block = layers::transformer_block(w.refine, tokens, head_count, false);
  return ad::add_row(ad::matmul(block.hidden, w.projection), w.projection_bias);
}

}  // namespace lens::descriptor
