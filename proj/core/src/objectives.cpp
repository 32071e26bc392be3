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

#include "lens/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lens::objectives {

void LossWeights::validate() const {
  if (lambda_dice < 0.0 || lambda_bce < 0.0) throw std::invalid_argument("loss weights must be >= 0");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw std::invalid_argument("clamp_eps must be in (0, 0.5)");
  if (dice_smooth < 0.0) throw std::invalid_argument("dice_smooth must be >= 0");
}

ScalarWithGradient binary_cross_entropy(const Tensor& prediction, const Tensor& target, double eps) {
  require_same_shape(prediction, target, "binary_cross_entropy");
  const double inv_n = 1.0 / static_cast<double>(prediction.size());
  ScalarWithGradient out{0.0, Tensor(prediction.dims())};
  double sum = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double raw = prediction[i];
    const double p = std::clamp(raw, eps, 1.0 - eps);
    const double m = target[i];
    sum += m * std::log(p) + (1.0 - m) * std::log(1.0 - p);
    if (raw > eps && raw < 1.0 - eps) {
      out.gradient[i] = -inv_n * (m / p - (1.0 - m) / (1.0 - p));
    }
  }
  out.value = -sum * inv_n;
  return out;
}

ScalarWithGradient binary_cross_entropy_logits(const Tensor& logits, const Tensor& target,
                                               double eps) {
  require_same_shape(logits, target, "binary_cross_entropy_logits");
  const Tensor probabilities = sigmoid(logits);
  ScalarWithGradient out{binary_cross_entropy(probabilities, target, eps).value,
                         Tensor(logits.dims())};
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.gradient[i] = inv_n * (probabilities[i] - target[i]);
  }
  return out;
}

ScalarWithGradient soft_dice(const Tensor& prediction, const Tensor& target, double smooth) {
  require_same_shape(prediction, target, "soft_dice");
  double overlap_sum = 0.0, pred_sum = 0.0, target_sum = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    overlap_sum += prediction[i] * target[i];
    pred_sum += prediction[i];
    target_sum += target[i];
  }
  const double numerator = 2.0 * overlap_sum + smooth;
  const double denominator = pred_sum + target_sum + smooth;
  ScalarWithGradient out{1.0 - numerator / denominator, Tensor(prediction.dims())};
  const double inv_den2 = 1.0 / (denominator * denominator);
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    out.gradient[i] = -(2.0 * target[i] * denominator - numerator) * inv_den2;
  }
  return out;
}

double attention_loss(const Tensor& grounding, const Tensor& target_small, double eps) {
  return binary_cross_entropy(grounding, target_small, eps).value;
}

double dice_loss(const Tensor& probabilities, const Tensor& target, double smooth) {
  return soft_dice(probabilities, target, smooth).value;
}

double bce_mask_loss(const Tensor& probabilities, const Tensor& target, double eps) {
  return binary_cross_entropy(probabilities, target, eps).value;
}

double seg_loss(const Tensor& probabilities, const Tensor& target, const LossWeights& weights) {
  return weights.lambda_dice * dice_loss(probabilities, target, weights.dice_smooth) +
         weights.lambda_bce * bce_mask_loss(probabilities, target, weights.clamp_eps);
}

double total_loss(const Tensor& probabilities, const Tensor& target, const Tensor& grounding,
                  const Tensor& target_small, const LossWeights& weights) {
  return seg_loss(probabilities, target, weights) +
         attention_loss(grounding, target_small, weights.clamp_eps);
}

Overlap overlap(const MaskPair& pair) {
  require_same_shape(pair.prediction, pair.ground_truth, "overlap");
  Overlap o;
  for (std::size_t i = 0; i < pair.prediction.size(); ++i) {
    const bool p = pair.prediction[i] >= 0.5;
    const bool g = pair.ground_truth[i] >= 0.5;
    o.intersection += (p && g) ? 1.0 : 0.0;
    o.union_ += (p || g) ? 1.0 : 0.0;
  }
  return o;
}

double giou(const std::vector<MaskPair>& samples) {
  if (samples.empty()) throw std::invalid_argument("giou: no samples");
  double total = 0.0;
  for (const MaskPair& s : samples) {
    const Overlap o = overlap(s);
    total += o.union_ > 0.0 ? o.intersection / o.union_ : 1.0;
  }
  return total / static_cast<double>(samples.size());
}

double ciou(const std::vector<MaskPair>& samples) {
  if (samples.empty()) throw std::invalid_argument("ciou: no samples");
  double intersection = 0.0, union_ = 0.0;
  for (const MaskPair& s : samples) {
    const Overlap o = overlap(s);
    intersection += o.intersection;
    union_ += o.union_;
  }
  return union_ > 0.0 ? intersection / union_ : 1.0;
}

Tensor sigmoid(const Tensor& logits) {
  Tensor out = logits;
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

Tensor binarize(const Tensor& values, double threshold) {
  Tensor out = values;
  for (double& v : out.data()) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

}  // namespace lens::objectives
