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

#include <vector>

#include "lens/tensor.hpp"

namespace lens::objectives {

struct LossWeights {
  double lambda_dice = 2.0;
  double lambda_bce = 4.0;
  double clamp_eps = 1e-7;
  double dice_smooth = 1.0;

  /// Throws std::invalid_argument unless weights >= 0, eps in (0, 0.5).
  void validate() const;
};

/// A scalar objective together with its gradient w.r.t. the prediction.
struct ScalarWithGradient {
  double value = 0.0;
  Tensor gradient;
};

/// Mean binary cross-entropy, prediction clamped to [eps, 1 - eps]. Used for
/// both the grounding-map supervision and the mask BCE term.
ScalarWithGradient binary_cross_entropy(const Tensor& prediction, const Tensor& target, double eps);

/// binary_cross_entropy(sigmoid(logits), target, eps) with the gradient taken
/// w.r.t. the logits as (sigmoid(x) - m) / n. Inside the clamp this is the
/// exact derivative; saturated pixels keep a corrective gradient.
ScalarWithGradient binary_cross_entropy_logits(const Tensor& logits, const Tensor& target, double eps);

/// Soft Dice: 1 - (2 sum(P M) + s) / (sum P + sum M + s).
ScalarWithGradient soft_dice(const Tensor& prediction, const Tensor& target, double smooth);

/// BCE between the grounding map and the heatmap-resolution ground truth.
double attention_loss(const Tensor& grounding, const Tensor& target_small, double eps);
double dice_loss(const Tensor& probabilities, const Tensor& target, double smooth);
double bce_mask_loss(const Tensor& probabilities, const Tensor& target, double eps);
/// lambda_dice * dice + lambda_bce * bce.
double seg_loss(const Tensor& probabilities, const Tensor& target, const LossWeights& weights);
/// seg_loss + attention_loss, unweighted.
double total_loss(const Tensor& probabilities, const Tensor& target, const Tensor& grounding,
                  const Tensor& target_small, const LossWeights& weights);

/// Binary prediction/ground-truth pair; values >= 0.5 count as foreground.
struct MaskPair {
  Tensor prediction;
  Tensor ground_truth;
};

struct Overlap {
  double intersection = 0.0;
  double union_ = 0.0;
};

Overlap overlap(const MaskPair& pair);

/// Mean per-sample IoU. A sample whose union is empty scores 1.
double giou(const std::vector<MaskPair>& samples);
/// Summed intersections over summed unions (1 when every union is empty).
double ciou(const std::vector<MaskPair>& samples);

/// Elementwise logistic function.
Tensor sigmoid(const Tensor& logits);
/// 1 where value >= threshold, else 0.
Tensor binarize(const Tensor& values, double threshold = 0.5);

}  // namespace lens::objectives
