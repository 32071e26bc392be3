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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles.hpp"

namespace lens::objectives {
namespace {

constexpr double kEps = 1e-7;

Tensor filled(std::size_t h, std::size_t w, double v) { return Tensor({h, w}, v); }

Tensor pattern(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor m({h, w});
  for (double& v : m.data()) v = (rng() & 1u) ? 1.0 : 0.0;
  return m;
}

void expect_gradient(const std::function<ScalarWithGradient(const Tensor&)>& f, Tensor x) {
  const Tensor g = f(x).gradient;
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x).value;
    x[i] = saved - h;
    const double down = f(x).value;
    x[i] = saved;
    EXPECT_NEAR(g[i], (up - down) / (2.0 * h), 1e-8) << "entry " << i;
  }
}

TEST(AttentionLoss, UniformHalfIsLogTwo) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EXPECT_NEAR(attention_loss(filled(4, 4, 0.5), pattern(4, 4, seed), kEps), std::log(2.0), 1e-12);
  }
}

TEST(AttentionLoss, ClampedExtremes) {
  const Tensor m = pattern(3, 5, 4);
  Tensor inverse = m;
  for (double& v : inverse.data()) v = 1.0 - v;
  EXPECT_NEAR(attention_loss(m, m, kEps), -std::log1p(-kEps), 1e-15);
  EXPECT_NEAR(attention_loss(inverse, m, kEps), -std::log(kEps), 1e-9);
  EXPECT_NEAR(attention_loss(inverse, m, kEps), 16.118, 1e-3);
}

TEST(AttentionLoss, ShapeMismatchThrows) {
  EXPECT_THROW(attention_loss(filled(2, 2, 0.5), filled(2, 3, 1.0), kEps), std::invalid_argument);
}

TEST(DiceLoss, PerfectIsExactlyZero) {
  const Tensor m = pattern(6, 6, 5);
  EXPECT_EQ(dice_loss(m, m, 1.0), 0.0);
}

TEST(DiceLoss, DisjointFourAndFour) {
  Tensor p({4, 4}), m({4, 4});
  for (std::size_t i = 0; i < 4; ++i) {
    p[i] = 1.0;
    m[15 - i] = 1.0;
  }
  EXPECT_NEAR(dice_loss(p, m, 1.0), 1.0 - 1.0 / 9.0, 1e-15);
  EXPECT_NEAR(dice_loss(p, m, 1.0), 0.8889, 1e-4);
}

TEST(DiceLoss, HalfOnAllOnes) {
  EXPECT_NEAR(dice_loss(filled(2, 2, 0.5), filled(2, 2, 1.0), 1.0), 2.0 / 7.0, 1e-15);
}

TEST(BceMaskLoss, Examples) {
  EXPECT_NEAR(bce_mask_loss(filled(3, 3, 0.5), pattern(3, 3, 6), kEps), std::log(2.0), 1e-15);
  const Tensor m = pattern(3, 3, 7);
  EXPECT_NEAR(bce_mask_loss(m, m, kEps), 1e-7, 1e-12);
  EXPECT_NEAR(bce_mask_loss(filled(1, 1, 0.25), filled(1, 1, 1.0), kEps), 1.386294, 1e-6);
}

TEST(SegLoss, UniformHalfOnAllOnes) {
  const LossWeights w;
  const double v = seg_loss(filled(2, 2, 0.5), filled(2, 2, 1.0), w);
  EXPECT_NEAR(v, 2.0 * (2.0 / 7.0) + 4.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(v, 3.344017, 1e-6);
}

TEST(SegLoss, PerfectIsClampResidue) {
  const Tensor m = pattern(4, 4, 8);
  EXPECT_NEAR(seg_loss(m, m, LossWeights{}), 4e-7, 1e-11);
}

TEST(SegLoss, RecomposesFromComponents) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  Tensor p({5, 5});
  for (double& v : p.data()) v = u(rng);
  const Tensor m = pattern(5, 5, 10);
  const LossWeights w;
  const double parts = w.lambda_dice * dice_loss(p, m, w.dice_smooth) + w.lambda_bce * bce_mask_loss(p, m, w.clamp_eps);
  EXPECT_NEAR(seg_loss(p, m, w), parts, 1e-12);
}

TEST(TotalLoss, SumOfSegAndAttention) {
  const Tensor m = pattern(4, 4, 11);
  const Tensor small = pattern(2, 2, 12);
  const LossWeights w;
  EXPECT_NEAR(total_loss(m, m, small, small, w), seg_loss(m, m, w) + attention_loss(small, small, w.clamp_eps), 1e-15);
  LossWeights zero_bce = w;
  zero_bce.lambda_bce = 0.0;
  EXPECT_EQ(seg_loss(m, m, zero_bce), 0.0);
}

TEST(LossWeights, ValidateRejectsBadValues) {
  LossWeights w;
  w.clamp_eps = 0.6;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  LossWeights n;
  n.lambda_dice = -1.0;
  EXPECT_THROW(n.validate(), std::invalid_argument);
}

TEST(Gradients, BceMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Tensor p({3, 4});
  for (double& v : p.data()) v = u(rng);
  const Tensor m = pattern(3, 4, 14);
  expect_gradient([&](const Tensor& x) { return binary_cross_entropy(x, m, kEps); }, p);
}

TEST(Gradients, DiceMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Tensor p({3, 4});
  for (double& v : p.data()) v = u(rng);
  const Tensor m = pattern(3, 4, 16);
  expect_gradient([&](const Tensor& x) { return soft_dice(x, m, 1.0); }, p);
}

TEST(Gradients, LogitBceIsExactInsideClamp) {
  std::mt19937_64 rng(17);
  const Tensor x = oracle::random_tensor({3, 4}, rng, 2.0);
  const Tensor m = pattern(3, 4, 18);
  expect_gradient([&](const Tensor& l) { return binary_cross_entropy_logits(l, m, kEps); }, x);
  EXPECT_NEAR(binary_cross_entropy_logits(x, m, kEps).value, binary_cross_entropy(sigmoid(x), m, kEps).value, 1e-14);
}

TEST(Gradients, LogitBceKeepsCorrectiveGradientWhenSaturated) {
  const Tensor x = filled(1, 1, -40.0);
  const ScalarWithGradient r = binary_cross_entropy_logits(x, filled(1, 1, 1.0), kEps);
  EXPECT_NEAR(r.value, -std::log(kEps), 1e-9);
  EXPECT_LT(r.gradient[0], -0.99);
}

TEST(Metrics, TwoSampleExample) {
  Tensor a({4, 4}), gt2({4, 4}), pred2({4, 4});
  for (std::size_t i = 0; i < 4; ++i) a[i] = 1.0;
  for (std::size_t i = 0; i < 8; ++i) gt2[i] = 1.0;
  for (std::size_t i = 4; i < 8; ++i) pred2[i] = 1.0;
  const std::vector<MaskPair> s = {{a, a}, {pred2, gt2}};
  EXPECT_DOUBLE_EQ(giou(s), 0.75);
  EXPECT_DOUBLE_EQ(ciou(s), 2.0 / 3.0);
}

TEST(Metrics, PerfectAndDisjoint) {
  const Tensor m = pattern(4, 4, 19);
  Tensor inv = m;
  for (double& v : inv.data()) v = 1.0 - v;
  EXPECT_EQ(giou({{m, m}}), 1.0);
  EXPECT_EQ(ciou({{m, m}}), 1.0);
  EXPECT_EQ(giou({{inv, m}}), 0.0);
  EXPECT_EQ(ciou({{inv, m}}), 0.0);
}

TEST(Metrics, EqualUnionsMakeGiouEqualCiou) {
  std::vector<MaskPair> s;
  for (std::size_t overlap_cells = 0; overlap_cells <= 6; ++overlap_cells) {
    Tensor gt({3, 4}), pred({3, 4});
    for (std::size_t i = 0; i < 6; ++i) gt[i] = 1.0;
    for (std::size_t i = 6 - overlap_cells; i < 6; ++i) pred[i] = 1.0;
    s.push_back({pred, gt});
  }
  for (const MaskPair& p : s) EXPECT_EQ(oracle::count_overlap(p.prediction, p.ground_truth).union_, 6.0);
  EXPECT_NEAR(giou(s), ciou(s), 1e-15);
}

TEST(Metrics, AgreesWithCountingOracle) {
  std::vector<MaskPair> s;
  double inter = 0.0, uni = 0.0, mean = 0.0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    s.push_back({pattern(5, 5, 100 + k), pattern(5, 5, 200 + k)});
    const oracle::Counts c = oracle::count_overlap(s.back().prediction, s.back().ground_truth);
    inter += c.intersection;
    uni += c.union_;
    mean += c.intersection / c.union_;
  }
  EXPECT_NEAR(giou(s), mean / 10.0, 1e-15);
  EXPECT_NEAR(ciou(s), inter / uni, 1e-15);
}

TEST(Metrics, EmptyListThrowsAndEmptyUnionScoresOne) {
  EXPECT_THROW(giou({}), std::invalid_argument);
  EXPECT_THROW(ciou({}), std::invalid_argument);
  const Tensor z({2, 2});
  EXPECT_EQ(giou({{z, z}}), 1.0);
}

TEST(Binarize, ThresholdIsInclusive) {
  const Tensor b = binarize(Tensor::row_vector({0.49, 0.5, 0.9}));
  EXPECT_EQ(b, Tensor::row_vector({0.0, 1.0, 1.0}));
}

}  // namespace
}  // namespace lens::objectives
