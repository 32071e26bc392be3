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

#include "lens/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lens/config.hpp"
#include "lens/interchange.hpp"

namespace lens::io {
namespace {

using nlohmann::json;

constexpr const char* kCheckpointFormat = "lens-checkpoint";
const std::set<std::string> kRoles = {"image_features", "text_features", "sam_embedding", "gt_mask"};

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Model& model) {
  std::filesystem::create_directories(dir);
  RunConfig run;
  run.model = model.config;
  json manifest = {{"format", kCheckpointFormat},
                   {"version", 1},
                   {"config", json::parse(to_json(run))},
                   {"parameters", json::array()}};
  model.weights.visit([&](const std::string& name, const Tensor& t) {
    const std::string file = name + ".ltns";
    write_tensor(dir / file, t, DType::kFloat64);
    manifest["parameters"].push_back({{"name", name}, {"path", file}, {"dims", t.dims()}});
  });
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Model load_checkpoint(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kCheckpointFormat) {
    throw std::runtime_error("checkpoint manifest: not a lens checkpoint");
  }
  const RunConfig run = run_config_from_json(manifest.at("config").dump());
  Model model = init_model(run.model, 0);

  std::map<std::string, std::string> files;
  for (const json& p : manifest.at("parameters")) {
    files[p.at("name").get<std::string>()] = p.at("path").get<std::string>();
  }
  std::size_t matched = 0;
  model.weights.visit([&](const std::string& name, Tensor& t) {
    const auto it = files.find(name);
    if (it == files.end()) throw std::runtime_error("checkpoint: missing parameter " + name);
    StoredTensor stored = read_tensor(dir / it->second);
    if (stored.tensor.dims() != t.dims()) {
      throw std::runtime_error("checkpoint: parameter " + name + " has shape " +
                               shape_string(stored.tensor.dims()) + ", expected " +
                               shape_string(t.dims()));
    }
    t = std::move(stored.tensor);
    ++matched;
  });
  if (matched != files.size()) throw std::runtime_error("checkpoint: manifest lists unknown parameters");
  return model;
}

const ManifestFile* ExportManifest::find(const std::string& role) const {
  for (const ManifestFile& f : files) {
    if (f.role == role) return &f;
  }
  return nullptr;
}

void ExportManifest::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("export manifest: " + m); };
  if (layer < 0) fail("layer must be >= 0");
  if (image_length == 0 || text_length == 0 || dim == 0) fail("L_i, L_t and d must be positive");
  std::set<std::string> seen;
  for (const ManifestFile& f : files) {
    if (!kRoles.count(f.role)) fail("unknown role '" + f.role + "'");
    if (!seen.insert(f.role).second) fail("duplicate role '" + f.role + "'");
    if (f.path.empty()) fail("empty path for role '" + f.role + "'");
  }
  const ManifestFile* fi = find("image_features");
  const ManifestFile* ft = find("text_features");
  if (!fi || !ft) fail("image_features and text_features are required");
  if (fi->dims != std::vector<std::size_t>{image_length, dim}) fail("image_features dims must be (L_i, d)");
  if (ft->dims != std::vector<std::size_t>{text_length, dim}) fail("text_features dims must be (L_t, d)");
  if (const ManifestFile* se = find("sam_embedding"); se && se->dims.size() != 3) {
    fail("sam_embedding dims must be (h_e, w_e, d_s)");
  }
  if (const ManifestFile* gt = find("gt_mask"); gt && gt->dims.size() != 2) fail("gt_mask dims must be (H, W)");
}

std::string to_json(const ExportManifest& manifest) {
  json files = json::array();
  for (const ManifestFile& f : manifest.files) {
    files.push_back({{"role", f.role}, {"path", f.path}, {"dims", f.dims}});
  }
  const json out = {{"model", manifest.model}, {"layer", manifest.layer},
                    {"L_i", manifest.image_length}, {"L_t", manifest.text_length},
                    {"d", manifest.dim}, {"files", files}};
  return out.dump(2);
}

ExportManifest parse_export_manifest(const std::string& text) {
  ExportManifest m;
  try {
    const json in = json::parse(text);
    m.model = in.at("model").get<std::string>();
    m.layer = in.at("layer").get<int>();
    m.image_length = in.at("L_i").get<std::size_t>();
    m.text_length = in.at("L_t").get<std::size_t>();
    m.dim = in.at("d").get<std::size_t>();
    for (const json& f : in.at("files")) {
      m.files.push_back({f.at("role").get<std::string>(), f.at("path").get<std::string>(),
                         f.at("dims").get<std::vector<std::size_t>>()});
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("export manifest: ") + e.what());
  }
  m.validate();
  return m;
}

LoadedExport load_export(const std::filesystem::path& manifest_path) {
  LoadedExport out;
  out.manifest = parse_export_manifest(read_text(manifest_path));
  const std::filesystem::path base = manifest_path.parent_path();
  auto load = [&](const ManifestFile& f) {
    const std::filesystem::path own(f.path);
    const std::filesystem::path p = own.is_absolute() ? own : base / own;
    Tensor t = read_tensor(p).tensor;
    if (t.dims() != f.dims) {
      throw std::runtime_error("export: " + f.role + " file has shape " + shape_string(t.dims()) +
                               ", manifest declares " + shape_string(f.dims));
    }
    return t;
  };
  const std::size_t li = out.manifest.image_length;
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(li))));
  if (side * side != li) throw std::runtime_error("export: L_i = " + std::to_string(li) + " is not a square grid");
  out.input = {load(*out.manifest.find("image_features")), load(*out.manifest.find("text_features")),
               side, side};
  if (const ManifestFile* se = out.manifest.find("sam_embedding")) {
    out.image = decoder::ImageEmbedding{load(*se), decoder::EmbeddingSource::kFile};
  }
  if (const ManifestFile* gt = out.manifest.find("gt_mask")) out.mask = load(*gt);
  return out;
}

}  // namespace lens::io
