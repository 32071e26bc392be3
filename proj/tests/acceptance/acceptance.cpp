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

// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails. Thresholds are fixed here and nowhere else.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "json.hpp"
#include "lens/agent_router.hpp"
#include "lens/interchange.hpp"
#include "lens/keypoint.hpp"
#include "lens/objectives.hpp"
#include "lens/seg_head.hpp"
#include "lens/synthetic.hpp"
#include "lens/trainer.hpp"
#include "oracles.hpp"

namespace {

using namespace lens;
using Clock = std::chrono::steady_clock;

constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr std::size_t kNmsTrials = 200;
constexpr double kNmsRadius = 4.0;
constexpr std::size_t kNmsPoints = 16;
constexpr std::size_t kRefineTrials = 50;
constexpr double kRefineOffset = 0.45;
constexpr double kRefineTolerance = 1e-4;
constexpr double kLogTwoTolerance = 1e-9;
constexpr double kRecomposeTolerance = 1e-12;
constexpr double kRowSumTolerance = 1e-10;
constexpr double kAggregateTolerance = 1e-12;
constexpr double kMinGiou = 0.8;
constexpr double kMaxRegression = 0.02;
constexpr double kFitSeconds = 600.0;
constexpr std::size_t kSmoothingWindow = 200;
constexpr std::size_t kRoundTrips = 1000;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  const synth::ToyProblem toy = synth::make_toy_problem(8, 16, 4, 7);
  train::GradCheckOptions o;
  o.step = 1e-4;
  o.fraction = 0.1;
  o.seed = 7;
  o.tolerance = kGradTolerance;
  const train::GradCheckReport r = train::fd_gradient_check(toy.model, toy.sample, o);
  const double secs = seconds_since(start);
  return {r.passed() && r.max_relative_error < kGradTolerance && secs < kGradSeconds,
          fmt("max relative error %.3g over %.0f coordinates in %.1f s", r.max_relative_error,
              static_cast<double>(r.coordinates_checked), secs)};
}

Outcome nms_oracle() {
  std::mt19937_64 rng(200);
  std::size_t agree = 0;
  for (std::size_t t = 0; t < kNmsTrials; ++t) {
    const Tensor map = oracle::random_heatmap(16, 16, rng);
    const keypoint::KeypointSet got = keypoint::nms_extract(map, kNmsRadius, kNmsPoints);
    const std::vector<oracle::Peak> want = oracle::brute_nms(map, kNmsRadius, kNmsPoints);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].col == want[i].col && got[i].row == want[i].row && got[i].score == want[i].value;
    }
    agree += same ? 1 : 0;
  }
  return {agree == kNmsTrials, fmt("%.0f/%.0f heatmaps identical", static_cast<double>(agree), kNmsTrials)};
}

Outcome subpixel() {
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> curv(0.02, 0.5), off(-kRefineOffset, kRefineOffset), unit(-1.0, 1.0);
  std::uniform_int_distribution<int> cell(2, 13);
  double worst = 0.0;
  for (std::size_t t = 0; t < kRefineTrials; ++t) {
    const double a = curv(rng), b = curv(rng);
    const double e = 0.9 * std::sqrt(a * b) * unit(rng);
    const int cx = cell(rng), cy = cell(rng);
    const oracle::Quadratic q{a, b, e, cx + off(rng), cy + off(rng)};
    const Tensor map = oracle::sample_quadratic(q, 16, 16);
    const auto col = static_cast<std::size_t>(cx), row = static_cast<std::size_t>(cy);
    const keypoint::KeypointSet r =
        keypoint::subpixel_refine(map, {{static_cast<double>(cx), static_cast<double>(cy), map(row, col), col, row}});
    worst = std::max({worst, std::abs(r[0].x - q.px), std::abs(r[0].y - q.py)});
  }
  double worst_clip = 0.0;
  std::uniform_real_distribution<double> slope(-5.0, 5.0);
  std::uniform_int_distribution<int> any(0, 15);
  for (std::size_t t = 0; t < kRefineTrials; ++t) {
    const double sx = slope(rng), sy = (t % 2 == 0) ? 0.0 : slope(rng);
    Tensor map({16, 16});
    for (std::size_t r = 0; r < 16; ++r) {
      for (std::size_t c = 0; c < 16; ++c) map(r, c) = sx * static_cast<double>(c) + sy * static_cast<double>(r);
    }
    const auto col = static_cast<std::size_t>(any(rng)), row = static_cast<std::size_t>(any(rng));
    const keypoint::KeypointSet r = keypoint::subpixel_refine(
        map, {{static_cast<double>(col), static_cast<double>(row), map(row, col), col, row}});
    worst_clip = std::max({worst_clip, std::abs(r[0].x - static_cast<double>(col)),
                           std::abs(r[0].y - static_cast<double>(row))});
  }
  return {worst < kRefineTolerance && worst_clip <= 1.0,
          fmt("worst peak error %.3g, largest ramp offset %.3g", worst, worst_clip)};
}

Outcome loss_identities() {
  std::mt19937_64 rng(4);
  Tensor m({6, 6});
  for (double& v : m.data()) v = (rng() & 1u) ? 1.0 : 0.0;
  const double attn = objectives::attention_loss(Tensor({6, 6}, 0.5), m, 1e-7);
  const double dice = objectives::dice_loss(m, m, 1.0);
  objectives::LossWeights w;
  w.lambda_dice = 2.0;
  w.lambda_bce = 4.0;
  std::uniform_real_distribution<double> u(0.01, 0.99);
  Tensor p({6, 6});
  for (double& v : p.data()) v = u(rng);
  const double seg = objectives::seg_loss(p, m, w);
  const double parts = 2.0 * objectives::dice_loss(p, m, w.dice_smooth) + 4.0 * objectives::bce_mask_loss(p, m, w.clamp_eps);
  const double attn_err = std::abs(attn - std::log(2.0));
  const double seg_err = std::abs(seg - parts);
  return {attn_err <= kLogTwoTolerance && dice == 0.0 && seg_err <= kRecomposeTolerance,
          fmt("|attn - ln2| = %.3g, perfect dice = %.3g, recomposition error %.3g", attn_err, dice, seg_err)};
}

Outcome attention_contracts() {
  double worst_row = 0.0, worst_agg = 0.0;
  std::size_t nonzero_future = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const head::HeadParameters params = head::init_head(16, 4, rng, 0.5);
    std::mt19937_64 g(seed + 100);
    const head::HeadInput input{oracle::random_tensor({64, 16}, g), oracle::random_tensor({3, 16}, g), 8, 8};
    for (int layer : {1, 2}) {
      const head::LayerOutput out = head::layer_forward(params, layer, input.concatenated());
      const std::size_t n = input.total_length();
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (j > i && out.attention(i, j) != 0.0) ++nonzero_future;
          sum += out.attention(i, j);
        }
        worst_row = std::max(worst_row, std::abs(sum - 1.0));
      }
      const Tensor agg = head::aggregate_text_to_image(out.attention, 64, 3, 8, 8);
      const Tensor ref = oracle::brute_aggregate(out.attention, 64, 8, 8);
      for (std::size_t j = 0; j < agg.size(); ++j) worst_agg = std::max(worst_agg, std::abs(agg[j] - ref[j]));
    }
  }
  return {nonzero_future == 0 && worst_row <= kRowSumTolerance && worst_agg <= kAggregateTolerance,
          fmt("%.0f nonzero future entries, row-sum error %.3g, aggregate error %.3g",
              static_cast<double>(nonzero_future), worst_row, worst_agg)};
}

Outcome synthetic_training() {
  std::ifstream in(LENS_BASELINE_PATH);
  if (!in) return {false, std::string("cannot read baseline ") + LENS_BASELINE_PATH};
  const nlohmann::json baseline = nlohmann::json::parse(in);
  const double committed = baseline.at("giou").get<double>();

  const auto start = Clock::now();
  synth::FitConfig config = synth::FitConfig::blob_defaults();
  config.steps = 2000;
  config.seed = 7;
  const synth::FitReport r = synth::fit_synthetic(config);
  const double secs = seconds_since(start);
  const std::vector<double> smooth = synth::smoothed_loss(r.losses, kSmoothingWindow);
  bool monotone = !smooth.empty();
  for (std::size_t i = 1; i < smooth.size(); ++i) monotone = monotone && smooth[i] < smooth[i - 1];
  const bool pass = r.final.giou > kMinGiou && monotone && secs < kFitSeconds &&
                    r.final.giou >= committed - kMaxRegression;
  std::string detail = fmt("gIoU %.4f (committed %.4f), cIoU %.4f, ", r.final.giou, committed, r.final.ciou);
  detail += fmt("smoothed loss %.3f -> %.3f, ", smooth.empty() ? 0.0 : smooth.front(), smooth.empty() ? 0.0 : smooth.back());
  detail += std::string(monotone ? "monotone" : "NOT monotone") + fmt(", %.0f s", secs);
  return {pass, detail};
}

Outcome metrics() {
  Tensor a({4, 4}), gt2({4, 4}), pred2({4, 4});
  for (std::size_t i = 0; i < 4; ++i) a[i] = 1.0;
  for (std::size_t i = 0; i < 8; ++i) gt2[i] = 1.0;
  for (std::size_t i = 4; i < 8; ++i) pred2[i] = 1.0;
  const std::vector<objectives::MaskPair> two = {{a, a}, {pred2, gt2}};
  const double g = objectives::giou(two), c = objectives::ciou(two);

  std::vector<objectives::MaskPair> equal;
  for (std::size_t k = 0; k <= 6; ++k) {
    Tensor gt({3, 4}), pred({3, 4});
    for (std::size_t i = 0; i < 6; ++i) gt[i] = 1.0;
    for (std::size_t i = 6 - k; i < 6; ++i) pred[i] = 1.0;
    equal.push_back({pred, gt});
  }
  const double gap = std::abs(objectives::giou(equal) - objectives::ciou(equal));
  return {g == 0.75 && c == 2.0 / 3.0 && gap < 1e-15,
          fmt("gIoU %.17g, cIoU %.17g, equal-union gap %.3g", g, c, gap)};
}

Outcome router() {
  synth::FitConfig config = synth::FitConfig::blob_defaults();
  const Model model = init_model(config.model, 1);
  const synth::BlobTask task(config.task, config.model.model_dim, config.model.prompt_dim);
  Rng rng(2);
  const Sample s = task.sample(rng);
  const agent::Image image{"blob", s.pixels};
  agent::StubAgent stub(config.model.grid_h, config.model.grid_w, config.model.model_dim, 3);
  agent::PipelineSegmenter segmenter(model, s.pixels.dim(2), 4);
  agent::SessionMemory memory;

  const agent::TurnResult seg = agent::handle_turn(stub, segmenter, memory, "segment the dog", &image);
  const bool populated = memory.populated();
  const Tensor stored = populated ? memory.last->mask : Tensor();
  const agent::TurnResult follow =
      agent::handle_turn(stub, segmenter, memory, "what color is the segmented object?", nullptr);
  const agent::TurnResult dialogue = agent::handle_turn(stub, segmenter, memory, "how many chairs are there?", &image);
  const bool preserved = memory.populated() && memory.last->mask == stored;

  agent::SessionMemory empty;
  const agent::TurnResult reentry =
      agent::handle_turn(stub, segmenter, empty, "what color is the segmented object?", nullptr);

  const bool intents = seg.intent == agent::Intent::kSeg && follow.intent == agent::Intent::kFollowup &&
                       dialogue.intent == agent::Intent::kDialogue;
  const int depth = std::max({seg.depth, follow.depth, dialogue.depth, reentry.depth});
  const bool pass = intents && seg.reply == agent::kSegReply && populated && preserved && depth <= 1 &&
                    reentry.depth == 1 && reentry.intent == agent::Intent::kDialogue;
  std::ostringstream d;
  d << "intents " << to_string(seg.intent) << "/" << to_string(follow.intent) << "/" << to_string(dialogue.intent)
    << ", reply " << (seg.reply == agent::kSegReply ? "fixed" : "WRONG") << ", memory "
    << (populated ? "populated" : "EMPTY") << (preserved ? " then preserved" : " then CHANGED")
    << ", max depth " << depth;
  return {pass, d.str()};
}

Outcome interchange() {
  std::mt19937_64 rng(1000);
  std::uniform_int_distribution<int> rank(1, 3), extent(1, 8);
  std::size_t identical = 0, rejected = 0;
  for (std::size_t t = 0; t < kRoundTrips; ++t) {
    std::vector<std::size_t> dims(static_cast<std::size_t>(rank(rng)));
    for (auto& d : dims) d = static_cast<std::size_t>(extent(rng));
    Tensor x(dims);
    const bool single = t % 2 == 1;
    for (double& v : x.data()) {
      v = single ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(rng())))
                 : std::bit_cast<double>(rng());
    }
    const io::DType dtype = single ? io::DType::kFloat32 : io::DType::kFloat64;
    std::vector<std::uint8_t> bytes = io::encode_tensor(x, dtype);
    const Tensor back = io::decode_tensor(bytes).tensor;
    if (back.dims() == x.dims() && std::memcmp(back.storage().data(), x.storage().data(), x.size() * sizeof(double)) == 0) {
      ++identical;
    }
    const std::size_t header = 10 + 4 * dims.size();
    const std::size_t payload = x.size() * io::dtype_size(dtype);
    bytes[header + rng() % payload] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    try {
      io::decode_tensor(bytes);
    } catch (const io::ChecksumError&) {
      ++rejected;
    }
  }
  return {identical == kRoundTrips && rejected == kRoundTrips,
          fmt("%.0f/%.0f bit-identical, %.0f corrupted payloads rejected", static_cast<double>(identical),
              static_cast<double>(kRoundTrips), static_cast<double>(rejected))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"nms oracle equivalence", nms_oracle},
      {"sub-pixel exactness", subpixel},
      {"loss identities", loss_identities},
      {"attention contracts", attention_contracts},
      {"synthetic training regression", synthetic_training},
      {"metric correctness", metrics},
      {"router conformance", router},
      {"interchange", interchange},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
