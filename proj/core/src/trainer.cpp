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

#include "lens/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "lens/layers.hpp"

namespace lens::train {
namespace {

bool is_decoder(const std::string& name) { return name.rfind("decoder.", 0) == 0; }

}  // namespace

ParameterStore::ParameterStore(ModelWeights<Tensor>& weights, bool decoder_trainable) {
  weights.visit([&](const std::string& name, Tensor& t) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter name " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, &t, decoder_trainable || !is_decoder(name)});
  });
}

Tensor& ParameterStore::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return *entries_[it->second].tensor;
}

bool ParameterStore::trainable(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return entries_[it->second].trainable;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.tensor->size();
  return n;
}

std::size_t ParameterStore::trainable_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.trainable ? e.tensor->size() : 0;
  return n;
}

TrainablePredicate trainable_predicate(bool decoder_trainable) {
  return [decoder_trainable](const std::string& name) {
    return decoder_trainable || !is_decoder(name);
  };
}

void AdamW::step(ParameterStore& store, const GradientMap& gradients) {
  ++steps_;
  const auto t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (const ParameterStore::Entry& entry : store.entries()) {
    if (!entry.trainable) continue;
    const auto git = gradients.find(entry.name);
    if (git == gradients.end()) continue;
    const Tensor& g = git->second;
    Tensor& theta = *entry.tensor;
    require_same_shape(theta, g, "AdamW gradient");
    auto [mit, inserted] = moments_.try_emplace(entry.name, Tensor(theta.dims()), Tensor(theta.dims()));
    Tensor& m = mit->second.first;
    Tensor& v = mit->second.second;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= config_.learning_rate *
                  (m_hat / (std::sqrt(v_hat) + config_.epsilon) + config_.weight_decay * theta[i]);
    }
  }
}

BackwardResult backward(const Model& model, const Sample& sample, const ForwardOptions& options,
                        bool decoder_trainable) {
  ad::Tape tape;
  auto w = bind_weights(tape, model.weights, trainable_predicate(decoder_trainable));
  GraphOutputs outputs = forward_graph(w, model, sample.input, sample.image, options);
  LossGraph loss = loss_graph(outputs, model, sample.mask, options);
  tape.backward(loss.total);

  BackwardResult result;
  result.losses = loss.record;
  result.keypoints = outputs.keypoints;
  w.visit([&](const std::string& name, const ad::Var& v) {
    if (!tape.requires_grad(v.index())) return;
    const Tensor& g = v.grad();
    Tensor grad = g.empty() ? Tensor(v.value().dims()) : g;
    if (!grad.all_finite()) throw std::runtime_error("non-finite gradient in parameter " + name);
    result.gradients.emplace(name, std::move(grad));
  });
  return result;
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport fd_gradient_check(const Model& model, const Sample& sample,
                                  const GradCheckOptions& options) {
  ForwardOptions forward;
  forward.use_locals = options.use_locals;
  const BackwardResult reference = backward(model, sample, forward, options.decoder_trainable);
  forward.fixed_keypoints = &reference.keypoints;
  const BackwardResult analytic = backward(model, sample, forward, options.decoder_trainable);

  Model work = model;
  ParameterStore store(work.weights, options.decoder_trainable);
  Rng rng(options.seed);
  GradCheckReport report;
  for (const ParameterStore::Entry& entry : store.entries()) {
    if (!entry.trainable) continue;
    const Tensor& grad = analytic.gradients.at(entry.name);
    Tensor& theta = *entry.tensor;
    std::vector<std::size_t> coords(theta.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    std::shuffle(coords.begin(), coords.end(), rng);
    const auto count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(options.fraction * static_cast<double>(theta.size()))),
        1, theta.size());
    bool offends = false;
    for (std::size_t n = 0; n < count; ++n) {
      const std::size_t i = coords[n];
      const double original = theta[i];
      theta[i] = original + options.step;
      const double plus = evaluate_loss(work, sample, forward).total;
      theta[i] = original - options.step;
      const double minus = evaluate_loss(work, sample, forward).total;
      theta[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = relative_error(grad[i], numeric);
      ++report.coordinates_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = entry.name;
      }
      offends = offends || err >= options.tolerance;
    }
    if (offends) report.offending.push_back(entry.name);
  }
  return report;
}

StepRecord train_step(Model& model, const std::vector<Sample>& batch, AdamW& optimizer,
                      Rng& dropout_rng, const TrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  std::bernoulli_distribution global_only(config.description_dropout);
  const bool drop = global_only(dropout_rng);

  ForwardOptions options;
  options.use_locals = config.use_local_descriptions && !drop;
  options.normalize_attention = config.normalize_attention;
  options.loss = config.loss;

  StepRecord record;
  record.used_locals = options.use_locals;
  GradientMap total;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const Sample& sample : batch) {
    BackwardResult r = backward(model, sample, options, config.decoder_trainable);
    record.losses.total += inv * r.losses.total;
    record.losses.attention += inv * r.losses.attention;
    record.losses.seg += inv * r.losses.seg;
    record.losses.dice += inv * r.losses.dice;
    record.losses.bce += inv * r.losses.bce;
    for (auto& [name, g] : r.gradients) {
      auto [it, inserted] = total.try_emplace(name, Tensor(g.dims()));
      for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += inv * g[i];
    }
  }
  if (!std::isfinite(record.losses.total)) throw std::runtime_error("training diverged: loss is not finite");
  ParameterStore store(model.weights, config.decoder_trainable);
  optimizer.step(store, total);
  return record;
}

}  // namespace lens::train
