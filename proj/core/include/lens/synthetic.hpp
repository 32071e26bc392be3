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
#include <vector>

#include "lens/pipeline.hpp"
#include "lens/trainer.hpp"

// Desk-scale blob localization task. Each sample holds 1 to 3 Gaussian
// objects with distinct identities on a grid; the text query names one of
// them and the target mask is the set of image pixels that object owns.
namespace lens::synth {

struct BlobTaskConfig {
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;
  std::size_t identities = 4;  // K
  std::size_t max_objects = 3;
  double sigma_min = 0.9;      // blob radius range, cells
  double sigma_max = 1.6;
  double ownership = 0.5;      // a pixel belongs to its strongest blob above this level
  double feature_noise = 0.1;
  std::size_t patch = 4;       // image pixels per embedding cell
  std::uint64_t task_seed = 0x7a5c;  // fixes the identity embeddings

  void validate() const;
};

class BlobTask {
 public:
  BlobTask(BlobTaskConfig config, std::size_t model_dim, std::size_t prompt_dim);

  /// Deterministic in `rng`; the mask is (grid_h * patch) x (grid_w * patch).
  Sample sample(Rng& rng) const;
  const BlobTaskConfig& config() const { return config_; }

 private:
  BlobTaskConfig config_;
  Tensor identity_map_;  // (K + 1) x d, last row is background
  Tensor query_map_;     // K x d
  Tensor query_suffix_;  // 1 x d; the last text row is suffix + query, as a contextualized <SEG> token
  decoder::PatchEncoder encoder_;
};

struct Metrics {
  double giou = 0.0;
  double ciou = 0.0;
};

/// gIoU/cIoU of sigmoid(logits) >= 0.5 against each ground-truth mask,
/// resampled by nearest neighbour to the logit resolution.
Metrics evaluate(const Model& model, const std::vector<Sample>& samples);

struct FitConfig {
  BlobTaskConfig task;
  ModelConfig model;
  train::TrainConfig train;
  std::size_t steps = 2000;
  std::uint64_t seed = 7;
  std::size_t eval_samples = 64;

  /// d = d_s = 32, 4 heads, learning rate 5e-4, batch 8.
  static FitConfig blob_defaults();
};

struct FitReport {
  std::vector<LossRecord> losses;    // one batch mean per step
  std::vector<bool> used_locals;     // dropout branch per step
  std::vector<double> best_loss;     // running minimum of the total loss
  Metrics baseline;                  // held-out metrics before training
  Metrics final;
  Model model;
};

/// Trains a fresh model on generated batches and scores a held-out set.
/// Throws std::runtime_error when the loss becomes non-finite.
FitReport fit_synthetic(const FitConfig& config);

/// Means of consecutive windows of `window` steps (partial tail dropped).
std::vector<double> smoothed_loss(const std::vector<LossRecord>& losses, std::size_t window);

/// Small random problem for gradient checks: grid x grid features of width
/// `dim`, three text rows, a random rectangle mask, and weights drawn with
/// stddev 0.15 so that gradients sit well above finite-difference noise.
struct ToyProblem {
  Model model;
  Sample sample;
};
ToyProblem make_toy_problem(std::size_t grid, std::size_t dim, std::size_t points, std::uint64_t seed);

}  // namespace lens::synth
