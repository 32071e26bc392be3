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

#include "lens/autodiff.hpp"
#include "lens/layers.hpp"
#include "lens/rng.hpp"
#include "lens/tensor.hpp"

// The attachable two-layer head. Layer 1 recomputes causal attention over
// [image; text] and its text-to-image slice, averaged over text rows, is the
// grounding map. Layer 2 enhances the features and its last row is the
// start-of-answer feature.
namespace lens::head {

template <class T>
struct HeadWeights {
  BlockWeights<T> layer1;
  BlockWeights<T> layer2;

  template <class F>
  void visit(F&& f, const std::string& p = "") { each(*this, f, p); }
  template <class F>
  void visit(F&& f, const std::string& p = "") const { each(*this, f, p); }

 private:
  template <class S, class F>
  static void each(S& s, F& f, const std::string& p) {
    s.layer1.visit(f, p + "layer1.");
    s.layer2.visit(f, p + "layer2.");
  }
};

struct HeadParameters {
  std::size_t head_count = 4;
  HeadWeights<Tensor> weights;

  std::size_t model_dim() const { return weights.layer1.attn.query.rows(); }
  /// Throws std::invalid_argument on any shape or finiteness violation.
  void validate() const;
};

/// Scaled Gaussian projections, zero biases/offsets, unit gains.
HeadParameters init_head(std::size_t model_dim, std::size_t head_count, Rng& rng,
                         double stddev = 0.02);

/// Features from the frozen backbone. Image rows precede text rows.
struct HeadInput {
  Tensor image_features;  // L_i x d, row-major over a grid_h x grid_w grid
  Tensor text_features;   // L_t x d
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  std::size_t image_length() const { return image_features.rows(); }
  std::size_t text_length() const { return text_features.rows(); }
  std::size_t total_length() const { return image_length() + text_length(); }
  void validate() const;
  /// [F_i; F_t], L x d.
  Tensor concatenated() const;
};

struct HeadOutput {
  Tensor grounding;       // grid_h x grid_w, entries in [0, 1]
  Tensor enhanced;        // L x d
  Tensor start_feature;   // 1 x d, last row of `enhanced`
};

struct LayerOutput {
  Tensor attention;  // L x L, head-averaged, causal
  Tensor hidden;     // L x d
};

/// One head layer (1 or 2) on L x d input.
LayerOutput layer_forward(const HeadParameters& params, int layer_index, const Tensor& hidden_in);

/// Mean of the text rows' image columns of a head-averaged attention
/// matrix, reshaped to grid_h x grid_w.
Tensor aggregate_text_to_image(const Tensor& attention, std::size_t image_length,
                               std::size_t text_length, std::size_t grid_h, std::size_t grid_w);

HeadOutput head_forward(const HeadParameters& params, const HeadInput& input);

struct HeadGraph {
  ad::Var attention;      // layer-1 head-averaged attention, L x L
  ad::Var grounding;      // 1 x L_i
  ad::Var enhanced;       // L x d
  ad::Var start_feature;  // 1 x d
};

/// Differentiable head on a tape; `hidden_in` is [F_i; F_t].
HeadGraph head_forward(const HeadWeights<ad::Var>& weights, std::size_t head_count,
                       ad::Var hidden_in, std::size_t image_length);

ad::Var aggregate_text_to_image(ad::Var attention, std::size_t image_length);

}  // namespace lens::head
