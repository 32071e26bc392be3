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
#include <optional>
#include <string>
#include <vector>

#include "lens/pipeline.hpp"

// Per-turn routing between conversation, segmentation and follow-up
// questions about the last segmentation result.
namespace lens::agent {

enum class Intent { kDialogue, kSeg, kFollowup };

const char* to_string(Intent intent);

inline constexpr const char* kSegReply = "Sure, the segmentation result is generated.";

/// Pixels are H x W (grey) or H x W x C, values in [0, 1].
struct Image {
  std::string id;
  Tensor pixels;
};

struct StoredResult {
  Image image;
  Tensor mask;  // H x W in [0, 1]
};

/// At most one stored pair; written only by seg turns.
struct SessionMemory {
  std::optional<StoredResult> last;
  bool populated() const { return last.has_value(); }
};

/// Rule table, checked in order:
///   1. whole words "segment", "mask", "outline" or the phrase
///      "highlight the region" -> seg
///   2. "the segmented", "that region", or the word "it" while memory is
///      populated -> followup
///   3. otherwise dialogue
Intent route_intent(const std::string& instruction, bool memory_populated);

class AgentPort {
 public:
  virtual ~AgentPort() = default;
  virtual Intent route(const std::string& instruction, const Image* image,
                       const SessionMemory& memory) = 0;
  virtual head::HeadInput embed(const std::string& instruction, const Image& image) = 0;
  /// `context` is the image, the image|overlay concatenation, or empty.
  virtual std::string generate(const std::string& instruction, const Tensor& context) = 0;
};

class SegmentationPort {
 public:
  virtual ~SegmentationPort() = default;
  /// Mask probabilities at the image's H x W.
  virtual Tensor segment(const head::HeadInput& input, const Image& image) = 0;
};

/// Deterministic agent: rule routing, hashed-word text features, image
/// features from a fixed random projection of grid-averaged pixels.
class StubAgent : public AgentPort {
 public:
  StubAgent(std::size_t grid_h, std::size_t grid_w, std::size_t dim, std::uint64_t seed);

  Intent route(const std::string& instruction, const Image* image, const SessionMemory& memory) override;
  head::HeadInput embed(const std::string& instruction, const Image& image) override;
  std::string generate(const std::string& instruction, const Tensor& context) override;

 private:
  Tensor word_vector(const std::string& word) const;

  std::size_t grid_h_, grid_w_, dim_;
  std::uint64_t seed_;
};

/// Runs the full model; the image embedding comes from a patch encoder
/// over the pixels resampled to (f * grid) x (f * grid).
class PipelineSegmenter : public SegmentationPort {
 public:
  PipelineSegmenter(Model model, std::size_t channels, std::uint64_t encoder_seed);
  Tensor segment(const head::HeadInput& input, const Image& image) override;

 private:
  Model model_;
  decoder::PatchEncoder encoder_;
  std::size_t channels_;
};

struct TurnResult {
  Intent intent = Intent::kDialogue;  // intent that produced the reply
  std::string reply;
  std::optional<Tensor> mask;
  std::optional<Tensor> overlay;
  int depth = 0;  // 1 when the turn was re-entered
};

/// One turn. A follow-up with nothing stored is re-entered once as a fresh
/// turn; a second follow-up on empty memory is answered as dialogue.
/// Throws std::invalid_argument("segmentation requires an image").
TurnResult handle_turn(AgentPort& agent, SegmentationPort& segmenter, SessionMemory& memory,
                       const std::string& instruction, const Image* image);

/// 0.5 * grey(image) + 0.5 * mask.
Tensor overlay(const Tensor& pixels, const Tensor& mask);
/// [grey image | mask | overlay], H x 3W.
Tensor triptych(const Tensor& pixels, const Tensor& mask);
void export_triptych(const Tensor& pixels, const Tensor& mask, const std::filesystem::path& path);

/// One instruction per non-empty line; '#' starts a comment line.
std::vector<std::string> parse_script(const std::string& text);

}  // namespace lens::agent
