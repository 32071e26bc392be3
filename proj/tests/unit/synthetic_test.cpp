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

#include "lens/synthetic.hpp"

#include <gtest/gtest.h>

#include "lens/trainer.hpp"

namespace lens::synth {
namespace {

FitConfig small_fit(std::size_t steps) {
  FitConfig c = FitConfig::blob_defaults();
  c.model.model_dim = 16;
  c.model.prompt_dim = 16;
  c.train.batch_size = 2;
  c.steps = steps;
  c.eval_samples = 4;
  return c;
}

TEST(BlobTask, SampleShapesAndMask) {
  const BlobTaskConfig cfg;
  const BlobTask task(cfg, 16, 8);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const Sample s = task.sample(rng);
    EXPECT_EQ(s.input.image_features.dims(), (std::vector<std::size_t>{64, 16}));
    EXPECT_EQ(s.input.text_features.dims(), (std::vector<std::size_t>{2, 16}));
    EXPECT_EQ(s.image.features.dims(), (std::vector<std::size_t>{8, 8, 8}));
    EXPECT_EQ(s.mask.dims(), (std::vector<std::size_t>{32, 32}));
    EXPECT_EQ(s.pixels.dims(), (std::vector<std::size_t>{32, 32, cfg.identities + 1}));
    double on = 0.0;
    for (double v : s.mask.data()) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      on += v;
    }
    EXPECT_GT(on, 0.0);
  }
}

TEST(BlobTask, DeterministicInRng) {
  const BlobTask task(BlobTaskConfig{}, 16, 8);
  Rng a(9), b(9);
  const Sample x = task.sample(a), y = task.sample(b);
  EXPECT_EQ(x.input.image_features, y.input.image_features);
  EXPECT_EQ(x.mask, y.mask);
}

TEST(BlobTask, ValidateRejectsBadConfig) {
  BlobTaskConfig c;
  c.identities = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  BlobTaskConfig s;
  s.sigma_min = 2.0;
  s.sigma_max = 1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Pipeline, InferenceMatchesShapesAndBudget) {
  FitConfig c = small_fit(0);
  const Model model = init_model(c.model, 3);
  const BlobTask task(c.task, c.model.model_dim, c.model.prompt_dim);
  Rng rng(4);
  const Sample s = task.sample(rng);
  const PipelineOutput out = run_pipeline(model, s.input, s.image);
  EXPECT_LE(out.keypoints.size(), c.model.max_points);
  EXPECT_EQ(out.mask.logits.dims(), (std::vector<std::size_t>{32, 32}));
  EXPECT_EQ(out.descriptors.descriptors.rows(), out.keypoints.size() + 1);
  EXPECT_EQ(out.head.grounding.dims(), (std::vector<std::size_t>{8, 8}));
}

TEST(Pipeline, EvaluateLossMatchesBackwardRecord) {
  const ToyProblem p = make_toy_problem(6, 8, 4, 5);
  const ForwardOptions o;
  const LossRecord a = evaluate_loss(p.model, p.sample, o);
  const LossRecord b = train::backward(p.model, p.sample, o).losses;
  EXPECT_NEAR(a.total, b.total, 1e-12);
  EXPECT_NEAR(a.seg, 2.0 * a.dice + 4.0 * a.bce, 1e-12);
  EXPECT_NEAR(a.total, a.seg + a.attention, 1e-12);
}

TEST(Pipeline, MismatchedGridThrows) {
  const ToyProblem p = make_toy_problem(6, 8, 4, 6);
  Model other = p.model;
  other.config.grid_h = 5;
  EXPECT_THROW(run_pipeline(other, p.sample.input, p.sample.image), std::invalid_argument);
}

TEST(ToyProblem, ShapesFollowArguments) {
  const ToyProblem p = make_toy_problem(8, 16, 4, 7);
  EXPECT_EQ(p.model.config.grid_h, 8u);
  EXPECT_EQ(p.model.config.model_dim, 16u);
  EXPECT_EQ(p.model.config.max_points, 4u);
  EXPECT_EQ(p.sample.input.image_features.dims(), (std::vector<std::size_t>{64, 16}));
  EXPECT_EQ(p.sample.mask.dims(), (std::vector<std::size_t>{32, 32}));
}

TEST(FitSynthetic, ZeroStepsKeepsBaseline) {
  const FitReport r = fit_synthetic(small_fit(0));
  EXPECT_TRUE(r.losses.empty());
  EXPECT_EQ(r.final.giou, r.baseline.giou);
  EXPECT_EQ(r.final.ciou, r.baseline.ciou);
}

TEST(FitSynthetic, DoublingStepsNeverRaisesBestLoss) {
  const FitReport shorter = fit_synthetic(small_fit(10));
  const FitReport longer = fit_synthetic(small_fit(20));
  ASSERT_EQ(longer.best_loss.size(), 20u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(shorter.losses[i].total, longer.losses[i].total);
  EXPECT_LE(longer.best_loss.back(), shorter.best_loss.back());
  for (std::size_t i = 1; i < longer.best_loss.size(); ++i) EXPECT_LE(longer.best_loss[i], longer.best_loss[i - 1]);
}

TEST(FitSynthetic, GridMismatchThrows) {
  FitConfig c = small_fit(1);
  c.task.grid_h = 6;
  EXPECT_THROW(fit_synthetic(c), std::invalid_argument);
}

TEST(SmoothedLoss, WindowMeansDropTail) {
  std::vector<LossRecord> l(7);
  for (std::size_t i = 0; i < 7; ++i) l[i].total = static_cast<double>(i);
  const std::vector<double> s = smoothed_loss(l, 3);
  EXPECT_EQ(s, (std::vector<double>{1.0, 4.0}));
  EXPECT_THROW(smoothed_loss(l, 0), std::invalid_argument);
}

TEST(Evaluate, ScoresLieInUnitInterval) {
  const ToyProblem p = make_toy_problem(6, 8, 4, 8);
  const Metrics m = evaluate(p.model, {p.sample});
  EXPECT_GE(m.giou, 0.0);
  EXPECT_LE(m.giou, 1.0);
}

}  // namespace
}  // namespace lens::synth
