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

#include "lens/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lens {
namespace {

using nlohmann::json;

// One accessor table keeps the reader and the writer in step.
struct Field {
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <class T, class M>
Field field(M RunConfig::*group, T M::*member) {
  return {[=](const RunConfig& c) { return json((c.*group).*member); },
          [=](RunConfig& c, const json& v) { (c.*group).*member = v.get<T>(); }};
}

template <class T, class M, class N>
Field nested(M RunConfig::*group, N M::*inner, T N::*member) {
  return {[=](const RunConfig& c) { return json(((c.*group).*inner).*member); },
          [=](RunConfig& c, const json& v) { ((c.*group).*inner).*member = v.get<T>(); }};
}

template <class T>
Field top(T RunConfig::*member) {
  return {[=](const RunConfig& c) { return json(c.*member); },
          [=](RunConfig& c, const json& v) { c.*member = v.get<T>(); }};
}

const std::map<std::string, Field>& fields() {
  using train::AdamWConfig;
  using train::TrainConfig;
  static const std::map<std::string, Field> table = {
      {"grid_h", field(&RunConfig::model, &ModelConfig::grid_h)},
      {"grid_w", field(&RunConfig::model, &ModelConfig::grid_w)},
      {"d", field(&RunConfig::model, &ModelConfig::model_dim)},
      {"d_s", field(&RunConfig::model, &ModelConfig::prompt_dim)},
      {"head_count", field(&RunConfig::model, &ModelConfig::head_count)},
      {"m", field(&RunConfig::model, &ModelConfig::max_points)},
      {"nms_radius", field(&RunConfig::model, &ModelConfig::nms_radius)},
      {"window", field(&RunConfig::model, &ModelConfig::window)},
      {"refine_eps", field(&RunConfig::model, &ModelConfig::refine_eps)},
      {"upsample_factor", field(&RunConfig::model, &ModelConfig::upsample_factor)},
      {"init_stddev", field(&RunConfig::model, &ModelConfig::init_stddev)},
      {"position_seed", field(&RunConfig::model, &ModelConfig::position_seed)},
      {"lambda_dice", nested(&RunConfig::train, &TrainConfig::loss, &objectives::LossWeights::lambda_dice)},
      {"lambda_bce", nested(&RunConfig::train, &TrainConfig::loss, &objectives::LossWeights::lambda_bce)},
      {"clamp_eps", nested(&RunConfig::train, &TrainConfig::loss, &objectives::LossWeights::clamp_eps)},
      {"dice_smooth", nested(&RunConfig::train, &TrainConfig::loss, &objectives::LossWeights::dice_smooth)},
      {"learning_rate", nested(&RunConfig::train, &TrainConfig::optimizer, &AdamWConfig::learning_rate)},
      {"beta1", nested(&RunConfig::train, &TrainConfig::optimizer, &AdamWConfig::beta1)},
      {"beta2", nested(&RunConfig::train, &TrainConfig::optimizer, &AdamWConfig::beta2)},
      {"adam_eps", nested(&RunConfig::train, &TrainConfig::optimizer, &AdamWConfig::epsilon)},
      {"weight_decay", nested(&RunConfig::train, &TrainConfig::optimizer, &AdamWConfig::weight_decay)},
      {"batch_size", field(&RunConfig::train, &TrainConfig::batch_size)},
      {"description_dropout", field(&RunConfig::train, &TrainConfig::description_dropout)},
      {"decoder_trainable", field(&RunConfig::train, &TrainConfig::decoder_trainable)},
      {"normalize_attention", field(&RunConfig::train, &TrainConfig::normalize_attention)},
      {"use_local_descriptions", field(&RunConfig::train, &TrainConfig::use_local_descriptions)},
      {"seed", top(&RunConfig::seed)},
      {"steps", top(&RunConfig::steps)},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.loss.validate();
  if (train.batch_size == 0) throw std::invalid_argument("run config: batch_size must be >= 1");
  if (!(train.description_dropout >= 0.0 && train.description_dropout <= 1.0)) {
    throw std::invalid_argument("run config: description_dropout must be in [0, 1]");
  }
  if (!(train.optimizer.learning_rate >= 0.0)) throw std::invalid_argument("run config: learning_rate must be >= 0");
}

std::string to_json(const RunConfig& config) {
  json out = json::object();
  for (const auto& [name, f] : fields()) out[name] = f.get(config);
  return out.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  if (!in.is_object()) throw std::invalid_argument("run config: top level must be an object");
  RunConfig config;
  for (const auto& [key, value] : in.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw std::invalid_argument("run config: unknown key '" + key + "'");
    try {
      it->second.set(config, value);
    } catch (const json::exception& e) {
      throw std::invalid_argument("run config: bad value for '" + key + "': " + e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return run_config_from_json(buffer.str());
}

void apply_environment(RunConfig& config) {
  const char* raw = std::getenv("LENS_SEED");
  if (raw == nullptr) return;
  const std::string text(raw);
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (text.empty() || used != text.size() || text.front() == '-') {
    throw std::invalid_argument("LENS_SEED must be a non-negative integer, got '" + text + "'");
  }
  config.seed = value;
}

}  // namespace lens
