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
#include <filesystem>
#include <string>

#include "lens/pipeline.hpp"
#include "lens/trainer.hpp"

namespace lens {

/// Everything a run needs. Defaults: m = 16, window 3, lambda = (2, 4),
/// lr = 5e-5, batch 4.
struct RunConfig {
  ModelConfig model;
  train::TrainConfig train;
  std::uint64_t seed = 7;
  std::size_t steps = 2000;

  void validate() const;
};

/// JSON object with flat keys (grid_h, d, lambda_dice, learning_rate, ...).
std::string to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// LENS_SEED, when set, replaces `seed`. A malformed value is an error.
void apply_environment(RunConfig& config);

}  // namespace lens
