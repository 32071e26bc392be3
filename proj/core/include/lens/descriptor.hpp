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
#include <string>
#include <vector>

#include "lens/autodiff.hpp"
#include "lens/layers.hpp"
#include "lens/rng.hpp"
#include "lens/tensor.hpp"

// Descriptor model: per-keypoint cross-attention with the start-of-answer
// feature as the single query, then one self-attention block over
// [f_s; d_1..d_m] and a projection to the decoder width.
namespace lens::descriptor {

template <class T>
struct DescriptorWeights {
  AttentionWeights<T> cross;  // single head
  BlockWeights<T> refine;     // non-causal self-attention block
  T projection;               // d x d_s
  T projection_bias;          // 1 x d_s

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    s.cross.visit(f, p + "cross.");
    s.refine.visit(f, p + "refine.");
    f(p + "projection", s.projection);
    f(p + "projection_bias", s.projection_bias);
  }
};

struct DescriptorParams {
  std::size_t head_count = 4;
  DescriptorWeights<Tensor> weights;

  std::size_t model_dim() const { return weights.projection.rows(); }
  std::size_t prompt_dim() const { return weights.projection.cols(); }
};

DescriptorParams init_descriptor(std::size_t model_dim, std::size_t prompt_dim,
                                 std::size_t head_count, Rng& rng, double stddev = 0.02);

/// D: row 0 is the refined global descriptor, rows 1..m the keypoints.
struct DescriptorSet {
  Tensor descriptors;           // (m + 1) x d_s, or 1 x d_s without locals
  std::size_t keypoint_count = 0;
};

/// One d-vector (1 x d) per neighbourhood; empty input gives empty output.
std::vector<Tensor> describe_keypoints(const DescriptorParams& params, const Tensor& start_feature,
                                       const std::vector<Tensor>& neighborhoods);

/// Self-attention refinement and projection. With use_locals false only the
/// start feature enters and the result has a single row.
DescriptorSet global_refine(const DescriptorParams& params, const Tensor& start_feature,
                            const std::vector<Tensor>& locals, bool use_locals);

/// Differentiable cross-attention: `neighborhoods` stacks `count` groups of
/// `group` rows (count * group x d). Returns count x d.
ad::Var describe_keypoints(const DescriptorWeights<ad::Var>& w, ad::Var start_feature,
                           ad::Var neighborhoods, std::size_t count, std::size_t group);

/// Differentiable refinement; pass an invalid Var for `locals` to use the
/// start feature alone.
ad::Var global_refine(const DescriptorWeights<ad::Var>& w, std::size_t head_count,
                      ad::Var start_feature, ad::Var locals);

}  // namespace lens::descriptor
