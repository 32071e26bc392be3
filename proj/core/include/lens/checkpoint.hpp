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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lens/pipeline.hpp"

namespace lens::io {

/// One TensorFile per named parameter plus manifest.json listing names,
/// files, dims and the model config.
void save_checkpoint(const std::filesystem::path& dir, const Model& model);
/// Throws std::runtime_error on missing, extra or mis-shaped parameters.
Model load_checkpoint(const std::filesystem::path& dir);

/// Feature export written by the extractor:
/// {model, layer, L_i, L_t, d, files: [{role, path, dims}]}.
struct ManifestFile {
  std::string role;  // image_features | text_features | sam_embedding | gt_mask
  std::string path;  // relative to the manifest directory unless absolute
  std::vector<std::size_t> dims;
};

struct ExportManifest {
  std::string model;
  int layer = 14;
  std::size_t image_length = 0;  // L_i
  std::size_t text_length = 0;   // L_t
  std::size_t dim = 0;           // d
  std::vector<ManifestFile> files;

  const ManifestFile* find(const std::string& role) const;
  void validate() const;
};

std::string to_json(const ExportManifest& manifest);
ExportManifest parse_export_manifest(const std::string& text);

struct LoadedExport {
  ExportManifest manifest;
  head::HeadInput input;  // grid is sqrt(L_i) x sqrt(L_i)
  std::optional<decoder::ImageEmbedding> image;
  std::optional<Tensor> mask;
};

/// Reads every referenced TensorFile and checks it against the declared dims.
LoadedExport load_export(const std::filesystem::path& manifest_path);

}  // namespace lens::io
