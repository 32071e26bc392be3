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
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lens/autodiff.hpp"
#include "lens/rng.hpp"
#include "lens/tensor.hpp"

// Transformer building blocks shared by the segmentation head, the
// descriptor model and the mask decoder.
//
// Weight bundles are templated on their element type: `X<Tensor>` owns
// values, `X<ad::Var>` is the same bundle bound onto a tape. Every bundle
// exposes visit(f, prefix), calling f(name, field) for each leaf in a fixed
// order; names are stable and double as checkpoint keys.
namespace lens {

template <class T>
struct NormWeights {
  T gain;
  T offset;

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    f(p + "gain", s.gain);
    f(p + "offset", s.offset);
  }
};

template <class T>
struct AttentionWeights {
  T query;
  T key;
  T value;
  T output;

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    f(p + "query", s.query);
    f(p + "key", s.key);
    f(p + "value", s.value);
    f(p + "output", s.output);
  }
};

template <class T>
struct FeedForwardWeights {
  T in;
  T in_bias;
  T out;
  T out_bias;

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    f(p + "in", s.in);
    f(p + "in_bias", s.in_bias);
    f(p + "out", s.out);
    f(p + "out_bias", s.out_bias);
  }
};

/// Pre-norm transformer block: x + Attn(LN(x)), then + FFN(LN(.)).
template <class T>
struct BlockWeights {
  NormWeights<T> attn_norm;
  AttentionWeights<T> attn;
  NormWeights<T> ffn_norm;
  FeedForwardWeights<T> ffn;

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    s.attn_norm.visit(f, p + "attn_norm.");
    s.attn.visit(f, p + "attn.");
    s.ffn_norm.visit(f, p + "ffn_norm.");
    s.ffn.visit(f, p + "ffn.");
  }
};

NormWeights<Tensor> init_norm(std::size_t dim);
/// Square projections of side `dim`, entries N(0, stddev^2).
AttentionWeights<Tensor> init_attention(std::size_t dim, double stddev, Rng& rng);
FeedForwardWeights<Tensor> init_feed_forward(std::size_t dim, std::size_t hidden, double stddev,
                                             Rng& rng);
BlockWeights<Tensor> init_block(std::size_t dim, double stddev, Rng& rng);

/// Binds a value bundle onto a tape. Leaves for which `trainable(name)` is
/// true become parameters, the rest constants. An empty predicate marks
/// everything trainable.
template <template <class> class W>
W<ad::Var> bind_weights(ad::Tape& tape, const W<Tensor>& weights,
                const std::function<bool(const std::string&)>& trainable = {},
                const std::string& prefix = "") {
  std::vector<ad::Var> vars;
  weights.visit(
      [&](const std::string& name, const Tensor& t) {
        vars.push_back(!trainable || trainable(name) ? tape.parameter(t) : tape.constant(t));
      },
      prefix);
  W<ad::Var> out;
  std::size_t i = 0;
  out.visit([&](const std::string&, ad::Var& v) { v = vars.at(i++); });
  return out;
}

/// Number of scalar entries across a value bundle.
template <class W>
std::size_t count_parameters(const W& weights) {
  std::size_t total = 0;
  weights.visit([&](const std::string&, const Tensor& t) { total += t.size(); });
  return total;
}

namespace layers {

struct AttentionResult {
  ad::Var output;
  /// Attention probabilities averaged over heads (queries x keys).
  ad::Var mean_probabilities;
};

/// Multi-head scaled dot-product attention with output projection.
/// Scores are scaled by 1/sqrt(head_dim). `causal` requires square scores.
AttentionResult attention(const AttentionWeights<ad::Var>& w, ad::Var queries, ad::Var keys,
                          ad::Var values, std::size_t head_count, bool causal);

ad::Var norm(const NormWeights<ad::Var>& w, ad::Var x);
/// GELU MLP: gelu(x W_in + b_in) W_out + b_out.
ad::Var feed_forward(const FeedForwardWeights<ad::Var>& w, ad::Var x);

struct BlockResult {
  ad::Var hidden;
  ad::Var mean_probabilities;
};

BlockResult transformer_block(const BlockWeights<ad::Var>& w, ad::Var x, std::size_t head_count,
                              bool causal);

}  // namespace layers
}  // namespace lens
