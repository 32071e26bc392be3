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
#include <map>
#include <string>
#include <vector>

#include "lens/pipeline.hpp"
#include "lens/rng.hpp"

namespace lens::train {

using GradientMap = std::map<std::string, Tensor>;

/// Flat, name-addressed view over every tensor of a model.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor* tensor = nullptr;
    bool trainable = true;
  };

  /// Decoder weights are frozen unless `decoder_trainable`.
  ParameterStore(ModelWeights<Tensor>& weights, bool decoder_trainable);

  const std::vector<Entry>& entries() const { return entries_; }
  Tensor& at(const std::string& name);
  bool trainable(const std::string& name) const;
  std::size_t parameter_count() const;
  std::size_t trainable_count() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Name predicate matching ParameterStore's freezing rule.
TrainablePredicate trainable_predicate(bool decoder_trainable);

struct AdamWConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with bias correction and decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  /// Updates every trainable entry that has a gradient.
  void step(ParameterStore& store, const GradientMap& gradients);
  std::size_t step_count() const { return steps_; }
  const AdamWConfig& config() const { return config_; }
  const Tensor& first_moment(const std::string& name) const { return moments_.at(name).first; }
  const Tensor& second_moment(const std::string& name) const { return moments_.at(name).second; }

 private:
  AdamWConfig config_;
  std::size_t steps_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

struct BackwardResult {
  LossRecord losses;
  GradientMap gradients;
  keypoint::KeypointSet keypoints;
};

/// Reverse-mode gradients of the total loss for every trainable tensor.
/// Throws std::runtime_error naming the parameter on a non-finite gradient.
BackwardResult backward(const Model& model, const Sample& sample, const ForwardOptions& options,
                        bool decoder_trainable = true);

struct GradCheckOptions {
  double step = 1e-4;
  double fraction = 1.0;  // share of coordinates checked per tensor
  std::uint64_t seed = 7;
  double tolerance = 1e-4;
  bool use_locals = true;
  bool decoder_trainable = true;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t coordinates_checked = 0;
  std::vector<std::string> offending;  // parameters with any error above tolerance
  bool passed() const { return offending.empty(); }
};

/// |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8), using central differences.
double relative_error(double analytic, double numeric);

/// Compares backward() against central differences on a seeded subset of
/// coordinates. Keypoints are frozen at their unperturbed values so the
/// finite differences see the same stop-gradient graph.
GradCheckReport fd_gradient_check(const Model& model, const Sample& sample,
                                  const GradCheckOptions& options);

struct TrainConfig {
  AdamWConfig optimizer;
  objectives::LossWeights loss;
  std::size_t batch_size = 4;
  double description_dropout = 0.5;  // P(global description only) per batch
  bool decoder_trainable = true;
  bool normalize_attention = false;
  bool use_local_descriptions = true;
};

struct StepRecord {
  LossRecord losses;  // batch means
  bool used_locals = true;
};

/// One AdamW update on batch-averaged gradients. Per batch, a Bernoulli
/// draw from `dropout_rng` picks the global-only or the full description set.
StepRecord train_step(Model& model, const std::vector<Sample>& batch, AdamW& optimizer,
                      Rng& dropout_rng, const TrainConfig& config);

}  // namespace lens::train
