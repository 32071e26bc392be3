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

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>

#include <cmath>

#include "lens/autodiff.hpp"
#include "lens/synthetic.hpp"

namespace lens::train {
namespace {

synth::ToyProblem toy(std::uint64_t seed = 7) { return synth::make_toy_problem(6, 8, 4, seed); }

bool bit_identical(const ModelWeights<Tensor>& a, const ModelWeights<Tensor>& b) {
  std::vector<const Tensor*> left;
  a.visit([&](const std::string&, const Tensor& t) { left.push_back(&t); });
  std::size_t i = 0;
  bool same = true;
  b.visit([&](const std::string&, const Tensor& t) {
    const Tensor& l = *left.at(i++);
    same = same && l.dims() == t.dims() &&
           std::memcmp(l.storage().data(), t.storage().data(), t.size() * sizeof(double)) == 0;
  });
  return same;
}

TEST(ParameterStore, FreezesDecoderOnRequest) {
  synth::ToyProblem p = toy();
  ParameterStore all(p.model.weights, true);
  ParameterStore frozen(p.model.weights, false);
  EXPECT_EQ(all.parameter_count(), count_parameters(p.model.weights));
  EXPECT_EQ(all.trainable_count(), all.parameter_count());
  EXPECT_LT(frozen.trainable_count(), frozen.parameter_count());
  for (const auto& e : frozen.entries()) EXPECT_EQ(e.trainable, e.name.rfind("decoder.", 0) != 0) << e.name;
  EXPECT_THROW(all.at("no.such.tensor"), std::out_of_range);
  EXPECT_TRUE(trainable_predicate(false)("head.layer1.attn.query"));
  EXPECT_FALSE(trainable_predicate(false)("decoder.mask_token"));
}

// One coordinate of cls_position is the "parameter"; the rest see zero gradient.
TEST(AdamW, SecondMomentFreeReducesToScaledSignedDescent) {
  synth::ToyProblem p = toy();
  ParameterStore store(p.model.weights, true);
  Tensor& theta = store.at("prompt.cls_position");
  const double start = theta[0];
  AdamWConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.0;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);
  const std::vector<double> grads = {0.5, -2.0, 3.0, 0.1, -0.7};
  double m = 0.0, expected = start;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    Tensor g(theta.dims());
    g[0] = grads[t - 1];
    opt.step(store, {{"prompt.cls_position", g}});
    m = 0.9 * m + 0.1 * grads[t - 1];
    const double m_hat = m / (1.0 - std::pow(0.9, static_cast<double>(t)));
    expected -= 0.01 * m_hat / (std::abs(grads[t - 1]) + cfg.epsilon);
    EXPECT_NEAR(theta[0], expected, 1e-15);
  }
}

TEST(AdamW, NoMomentumStepIsLearningRateTimesSign) {
  synth::ToyProblem p = toy();
  ParameterStore store(p.model.weights, true);
  Tensor& theta = store.at("prompt.cls_position");
  const double start = theta[0];
  AdamWConfig cfg;
  cfg.learning_rate = 0.02;
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.0;
  cfg.weight_decay = 0.0;
  cfg.epsilon = 0.0;
  AdamW opt(cfg);
  Tensor g(theta.dims());
  g[0] = -37.5;
  opt.step(store, {{"prompt.cls_position", g}});
  EXPECT_DOUBLE_EQ(theta[0], start + 0.02);
  g[0] = 1e-3;
  opt.step(store, {{"prompt.cls_position", g}});
  EXPECT_DOUBLE_EQ(theta[0], start + 0.02 - 0.02);
}

TEST(AdamW, DecoupledWeightDecayWithZeroGradient) {
  synth::ToyProblem p = toy();
  ParameterStore store(p.model.weights, true);
  Tensor& theta = store.at("prompt.cls_position");
  const Tensor before = theta;
  AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.5;
  AdamW opt(cfg);
  opt.step(store, {{"prompt.cls_position", Tensor(theta.dims())}});
  for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_NEAR(theta[i], before[i] * (1.0 - 0.05), 1e-15);
}

TEST(AdamW, FrozenAndAbsentEntriesUntouched) {
  synth::ToyProblem p = toy();
  const ModelWeights<Tensor> before = p.model.weights;
  ParameterStore store(p.model.weights, false);
  AdamW opt(AdamWConfig{});
  Tensor g(store.at("decoder.mask_token").dims(), 1.0);
  opt.step(store, {{"decoder.mask_token", g}});
  EXPECT_TRUE(bit_identical(before, p.model.weights));
}

TEST(FiniteDifferences, SquareAtThree) {
  ad::Tape tape;
  const ad::Var x = tape.parameter(Tensor::matrix(1, 1, 3.0));
  tape.backward(ad::mul(x, x));
  const double h = 1e-4;
  const double fd = ((3.0 + h) * (3.0 + h) - (3.0 - h) * (3.0 - h)) / (2.0 * h);
  EXPECT_NEAR(x.grad()[0], 6.0, 1e-15);
  EXPECT_NEAR(fd, 6.0, 1e-9);
  EXPECT_LT(relative_error(x.grad()[0], fd), 1e-9);
}

TEST(RelativeError, FloorProtectsTinyValues) {
  EXPECT_DOUBLE_EQ(relative_error(1e-12, 0.0), 1e-12 / 1e-8);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
}

TEST(Backward, LossScaleScalesGradients) {
  const synth::ToyProblem p = toy(3);
  ForwardOptions once;
  ForwardOptions twice;
  twice.loss_scale = 2.0;
  const BackwardResult a = backward(p.model, p.sample, once);
  const BackwardResult b = backward(p.model, p.sample, twice);
  ASSERT_EQ(a.gradients.size(), b.gradients.size());
  for (const auto& [name, g] : a.gradients) {
    const Tensor& h = b.gradients.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(h[i], 2.0 * g[i], 1e-12 * (1.0 + std::abs(g[i]))) << name;
  }
}

TEST(Backward, FrozenDecoderHasNoGradients) {
  const synth::ToyProblem p = toy(4);
  const BackwardResult r = backward(p.model, p.sample, ForwardOptions{}, false);
  EXPECT_FALSE(r.gradients.empty());
  for (const auto& [name, g] : r.gradients) EXPECT_NE(name.rfind("decoder.", 0), 0u) << name;
}

TEST(GradCheck, ToyProblemPasses) {
  const synth::ToyProblem p = toy(5);
  GradCheckOptions o;
  o.fraction = 0.05;
  const GradCheckReport r = fd_gradient_check(p.model, p.sample, o);
  EXPECT_TRUE(r.passed()) << r.max_relative_error << " at " << r.worst_parameter;
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_GT(r.coordinates_checked, 0u);
}

TEST(GradCheck, ZeroToleranceFlagsParameters) {
  const synth::ToyProblem p = toy(6);
  GradCheckOptions o;
  o.fraction = 0.01;
  o.tolerance = 0.0;
  const GradCheckReport r = fd_gradient_check(p.model, p.sample, o);
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.offending.empty());
}

TEST(TrainStep, ZeroLearningRateIsBitIdentical) {
  synth::ToyProblem p = toy(8);
  const ModelWeights<Tensor> before = p.model.weights;
  TrainConfig cfg;
  cfg.optimizer.learning_rate = 0.0;
  AdamW opt(cfg.optimizer);
  Rng rng(1);
  train_step(p.model, {p.sample}, opt, rng, cfg);
  EXPECT_TRUE(bit_identical(before, p.model.weights));
}

TEST(TrainStep, OverfitsOneSample) {
  synth::ToyProblem p = toy(9);
  TrainConfig cfg;
  cfg.optimizer.learning_rate = 1e-3;
  AdamW opt(cfg.optimizer);
  Rng rng(2);
  ForwardOptions eval;
  const double before = evaluate_loss(p.model, p.sample, eval).total;
  for (int step = 0; step < 200; ++step) train_step(p.model, {p.sample}, opt, rng, cfg);
  EXPECT_LT(evaluate_loss(p.model, p.sample, eval).total, before);
  EXPECT_EQ(opt.step_count(), 200u);
}

TEST(TrainStep, DropoutBranchesReproducible) {
  auto branches = [](std::uint64_t seed) {
    synth::ToyProblem p = toy(10);
    TrainConfig cfg;
    AdamW opt(cfg.optimizer);
    Rng rng(seed);
    std::vector<bool> used;
    for (int i = 0; i < 12; ++i) used.push_back(train_step(p.model, {p.sample}, opt, rng, cfg).used_locals);
    return used;
  };
  const std::vector<bool> a = branches(42);
  EXPECT_EQ(a, branches(42));
  EXPECT_NE(std::count(a.begin(), a.end(), true), 0);
  EXPECT_NE(std::count(a.begin(), a.end(), false), 0);
}

TEST(TrainStep, EmptyBatchThrows) {
  synth::ToyProblem p = toy();
  AdamW opt(AdamWConfig{});
  Rng rng(1);
  EXPECT_THROW(train_step(p.model, {}, opt, rng, TrainConfig{}), std::invalid_argument);
}

}  // namespace
}  // namespace lens::train
