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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>
#include <stdexcept>

#include "lens/numerics.hpp"
#include "lens/objectives.hpp"

namespace lens::synth {
namespace {

struct Blob {
  std::size_t identity;
  double cx, cy, sigma;
};

double intensity(const Blob& b, double x, double y) {
  const double dx = x - b.cx, dy = y - b.cy;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
}

}  // namespace

void BlobTaskConfig::validate() const {
  auto fail = [](const char* m) { throw std::invalid_argument(std::string("blob task: ") + m); };
  if (grid_h < 2 || grid_w < 2) fail("grid must be at least 2 x 2");
  if (identities == 0 || max_objects == 0 || max_objects > identities) fail("need 1 <= max_objects <= identities");
  if (!(sigma_min > 0.0 && sigma_min <= sigma_max)) fail("bad sigma range");
  if (!(ownership > 0.0 && ownership < 1.0)) fail("ownership level must be in (0, 1)");
  if (feature_noise < 0.0) fail("feature noise must be >= 0");
  if (patch == 0) fail("patch must be >= 1");
}

BlobTask::BlobTask(BlobTaskConfig config, std::size_t model_dim, std::size_t prompt_dim)
    : config_(config),
      encoder_(config.patch, config.identities + 1, prompt_dim, derive_seed(config.task_seed, 3)) {
  config_.validate();
  Rng rng(config_.task_seed);
  identity_map_ = gaussian({config_.identities + 1, model_dim}, 1.0, rng);
  query_map_ = gaussian({config_.identities, model_dim}, 1.0, rng);
  query_suffix_ = gaussian({1, model_dim}, 1.0, rng);
}

Sample BlobTask::sample(Rng& rng) const {
  const BlobTaskConfig& c = config_;
  const std::size_t h = c.grid_h, w = c.grid_w, k = c.identities, d = identity_map_.cols();
  std::uniform_int_distribution<std::size_t> count(1, c.max_objects);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, c.feature_noise);

  const std::size_t p = c.patch, ph = h * p, pw = w * p;
  auto pixel_centre = [p](std::size_t i) {
    return (static_cast<double>(i) + 0.5) / static_cast<double>(p) - 0.5;
  };
  std::vector<Blob> blobs;
  std::size_t target = 0;
  std::vector<int> owner(ph * pw);
  for (;;) {
    std::vector<std::size_t> ids(k);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::shuffle(ids.begin(), ids.end(), rng);
    blobs.clear();
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) {
      blobs.push_back({ids[i], unit(rng) * static_cast<double>(w - 1),
                       unit(rng) * static_cast<double>(h - 1),
                       c.sigma_min + unit(rng) * (c.sigma_max - c.sigma_min)});
    }
    target = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::size_t owned = 0;
    for (std::size_t py = 0; py < ph; ++py) {
      for (std::size_t px = 0; px < pw; ++px) {
        int best = -1;
        double level = c.ownership;
        for (std::size_t i = 0; i < n; ++i) {
          const double v = intensity(blobs[i], pixel_centre(px), pixel_centre(py));
          if (v > level) level = v, best = static_cast<int>(i);
        }
        owner[py * pw + px] = best;
        owned += best == static_cast<int>(target);
      }
    }
    if (owned > 0) break;
  }

  Sample s;
  s.mask = Tensor({ph, pw});
  for (std::size_t i = 0; i < ph * pw; ++i) s.mask[i] = owner[i] == static_cast<int>(target) ? 1.0 : 0.0;
  Tensor features = Tensor::matrix(h * w, d);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t cell = y * w + x;
      double peak = 0.0;
      auto row = features.row(cell);
      for (const Blob& b : blobs) {
        const double v = intensity(b, static_cast<double>(x), static_cast<double>(y));
        peak = std::max(peak, v);
        for (std::size_t j = 0; j < d; ++j) row[j] += v * identity_map_(b.identity, j);
      }
      for (std::size_t j = 0; j < d; ++j) row[j] += (1.0 - peak) * identity_map_(k, j) + noise(rng);
    }
  }
  Tensor text = Tensor::matrix(2, d);
  for (std::size_t j = 0; j < d; ++j) {
    text(0, j) = query_map_(blobs[target].identity, j);
    text(1, j) = query_suffix_(0, j) + text(0, j);
  }
  s.input = {std::move(features), std::move(text), h, w};

  s.pixels = Tensor({ph, pw, k + 1});
  for (std::size_t py = 0; py < ph; ++py) {
    for (std::size_t px = 0; px < pw; ++px) {
      for (const Blob& b : blobs) s.pixels(py, px, b.identity) = intensity(b, pixel_centre(px), pixel_centre(py));
      s.pixels(py, px, k) = 1.0;
    }
  }
  s.image = encoder_.encode(s.pixels);
  return s;
}

Metrics evaluate(const Model& model, const std::vector<Sample>& samples) {
  std::vector<objectives::MaskPair> pairs;
  pairs.reserve(samples.size());
  for (const Sample& s : samples) {
    const Tensor logits = run_pipeline(model, s.input, s.image).mask.logits;
    pairs.push_back({objectives::sigmoid(logits),
                     nearest_resample(s.mask, logits.dim(0), logits.dim(1))});
  }
  return {objectives::giou(pairs), objectives::ciou(pairs)};
}

FitConfig FitConfig::blob_defaults() {
  FitConfig c;
  c.model.grid_h = c.task.grid_h;
  c.model.grid_w = c.task.grid_w;
  c.model.model_dim = 32;
  c.model.prompt_dim = 32;
  c.model.head_count = 4;
  c.train.optimizer.learning_rate = 5e-4;
  c.train.batch_size = 8;
  return c;
}

FitReport fit_synthetic(const FitConfig& config) {
  if (config.model.grid_h != config.task.grid_h || config.model.grid_w != config.task.grid_w) {
    throw std::invalid_argument("fit_synthetic: model grid must match the task grid");
  }
  if (config.train.batch_size == 0) throw std::invalid_argument("fit_synthetic: batch size must be >= 1");
  const BlobTask task(config.task, config.model.model_dim, config.model.prompt_dim);
  FitReport report;
  report.model = init_model(config.model, derive_seed(config.seed, 0));
  Rng data_rng(derive_seed(config.seed, 1));
  Rng eval_rng(derive_seed(config.seed, 2));
  Rng dropout_rng(derive_seed(config.seed, 3));

  std::vector<Sample> held_out;
  for (std::size_t i = 0; i < config.eval_samples; ++i) held_out.push_back(task.sample(eval_rng));
  if (!held_out.empty()) report.baseline = evaluate(report.model, held_out);

  train::AdamW optimizer(config.train.optimizer);
  std::vector<Sample> batch(config.train.batch_size);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (Sample& s : batch) s = task.sample(data_rng);
    const train::StepRecord r = train::train_step(report.model, batch, optimizer, dropout_rng, config.train);
    best = std::min(best, r.losses.total);
    report.losses.push_back(r.losses);
    report.used_locals.push_back(r.used_locals);
    report.best_loss.push_back(best);
  }
  report.final = held_out.empty() ? report.baseline : evaluate(report.model, held_out);
  return report;
}

std::vector<double> smoothed_loss(const std::vector<LossRecord>& losses, std::size_t window) {
  if (window == 0) throw std::invalid_argument("smoothing window must be >= 1");
  std::vector<double> out;
  for (std::size_t start = 0; start + window <= losses.size(); start += window) {
    double sum = 0.0;
    for (std::size_t i = start; i < start + window; ++i) sum += losses[i].total;
    out.push_back(sum / static_cast<double>(window));
  }
  return out;
}

ToyProblem make_toy_problem(std::size_t grid, std::size_t dim, std::size_t points, std::uint64_t seed) {
  ModelConfig c;
  c.grid_h = c.grid_w = grid;
  c.model_dim = c.prompt_dim = dim;
  c.max_points = points;
  c.init_stddev = 0.15;
  ToyProblem toy{init_model(c, derive_seed(seed, 0)), {}};
  Rng rng(derive_seed(seed, 1));
  Sample& s = toy.sample;
  s.input = {gaussian({grid * grid, dim}, 1.0, rng), gaussian({3, dim}, 1.0, rng), grid, grid};
  s.image = {gaussian({grid, grid, dim}, 1.0, rng), decoder::EmbeddingSource::kStubEncoder};
  const std::size_t side = c.upsample_factor * grid;
  std::uniform_int_distribution<std::size_t> corner(0, side / 2);
  const std::size_t y0 = corner(rng), x0 = corner(rng);
  s.mask = Tensor({side, side});
  for (std::size_t y = y0; y < y0 + side / 2; ++y) {
    for (std::size_t x = x0; x < x0 + side / 2; ++x) s.mask(y, x) = 1.0;
  }
  return toy;
}

}  // namespace lens::synth
