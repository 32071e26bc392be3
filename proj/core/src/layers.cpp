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

#include "lens/layers.hpp"

#include <cmath>
#include <string>

namespace lens {

NormWeights<Tensor> init_norm(std::size_t dim) {
  return {Tensor::matrix(1, dim, 1.0), Tensor::matrix(1, dim, 0.0)};
}

AttentionWeights<Tensor> init_attention(std::size_t dim, double stddev, Rng& rng) {
  AttentionWeights<Tensor> w;
  w.query = gaussian({dim, dim}, stddev, rng);
  w.key = gaussian({dim, dim}, stddev, rng);
  w.value = gaussian({dim, dim}, stddev, rng);
  w.output = gaussian({dim, dim}, stddev, rng);
  return w;
}

FeedForwardWeights<Tensor> init_feed_forward(std::size_t dim, std::size_t hidden, double stddev,
                                             Rng& rng) {
  FeedForwardWeights<Tensor> w;
  w.in = gaussian({dim, hidden}, stddev, rng);
  w.in_bias = Tensor::matrix(1, hidden);
  w.out = gaussian({hidden, dim}, stddev, rng);
  w.out_bias = Tensor::matrix(1, dim);
  return w;
}

BlockWeights<Tensor> init_block(std::size_t dim, double stddev, Rng& rng) {
  BlockWeights<Tensor> w;
  w.attn_norm = init_norm(dim);
  w.attn = init_attention(dim, stddev, rng);
  w.ffn_norm = init_norm(dim);
  w.ffn = init_feed_forward(dim, 4 * dim, stddev, rng);
  return w;
}

namespace layers {

AttentionResult attention(const AttentionWeights<ad::Var>& w, ad::Var queries, ad::Var keys,
                          ad::Var values, std::size_t head_count, bool causal) {
  const std::size_t dim = w.query.value().cols();
  if (head_count == 0 || dim % head_count != 0) {
    throw std::invalid_argument("attention: model dim " + std::to_string(dim) +
                                " not divisible by head count " + std::to_string(head_count));
  }
  if (causal && queries.value().rows() != keys.value().rows()) {
    throw std::invalid_argument("attention: causal mask needs as many queries as keys");
  }
  const std::size_t head_dim = dim / head_count;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  ad::Var q = ad::matmul(queries, w.query);
  ad::Var k = ad::matmul(keys, w.key);
  ad::Var v = ad::matmul(values, w.value);

  std::vector<ad::Var> contexts;
  std::vector<ad::Var> probabilities;
  contexts.reserve(head_count);
  probabilities.reserve(head_count);
  for (std::size_t h = 0; h < head_count; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    ad::Var qh = head_count == 1 ? q : ad::slice_cols(q, lo, hi);
    ad::Var kh = head_count == 1 ? k : ad::slice_cols(k, lo, hi);
    ad::Var vh = head_count == 1 ? v : ad::slice_cols(v, lo, hi);
    ad::Var p = ad::softmax(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt), causal);
    probabilities.push_back(p);
    contexts.push_back(ad::matmul(p, vh));
  }
  ad::Var context = head_count == 1 ? contexts.front() : ad::concat_cols(contexts);
  ad::Var mean = head_count == 1 ? probabilities.front() : ad::average(probabilities);
  return {ad::matmul(context, w.output), mean};
}

ad::Var norm(const NormWeights<ad::Var>& w, ad::Var x) { return ad::layer_norm(x, w.gain, w.offset); }

ad::Var feed_forward(const FeedForwardWeights<ad::Var>& w, ad::Var x) {
  ad::Var hidden = ad::gelu(ad::add_row(ad::matmul(x, w.in), w.in_bias));
  return ad::add_row(ad::matmul(hidden, w.out), w.out_bias);
}

BlockResult transformer_block(const BlockWeights<ad::Var>& w, ad::Var x, std::size_t head_count,
                              bool causal) {
  ad::Var normed = norm(w.attn_norm, x);
  AttentionResult attn = attention(w.attn, normed, normed, normed, head_count, causal);
  ad::Var mid = ad::add(x, attn.output);
  ad::Var out = ad::add(mid, feed_forward(w.ffn, norm(w.ffn_norm, mid)));
  return {out, attn.mean_probabilities};
}

}  // namespace layers
}  // namespace lens
