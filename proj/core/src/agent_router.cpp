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

#include "lens/agent_router.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lens/interchange.hpp"
#include "lens/numerics.hpp"
#include "lens/objectives.hpp"
#include "lens/rng.hpp"

namespace lens::agent {
namespace {

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || c == '\'') {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

bool has_word(const std::vector<std::string>& words, const char* w) {
  return std::find(words.begin(), words.end(), w) != words.end();
}

bool has_phrase(const std::string& normalized, const char* phrase) {
  return normalized.find(std::string(" ") + phrase + " ") != std::string::npos;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::size_t channels_of(const Tensor& pixels) { return pixels.rank() == 3 ? pixels.dim(2) : 1; }

double pixel(const Tensor& pixels, std::size_t y, std::size_t x, std::size_t c) {
  return pixels.rank() == 3 ? pixels(y, x, c) : pixels(y, x);
}

void require_image(const Tensor& pixels) {
  if (pixels.rank() != 2 && pixels.rank() != 3) {
    throw std::invalid_argument("image pixels must be H x W or H x W x C");
  }
}

Tensor grey(const Tensor& pixels) {
  require_image(pixels);
  const std::size_t h = pixels.dim(0), w = pixels.dim(1), c = channels_of(pixels);
  Tensor out({h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) sum += pixel(pixels, y, x, k);
      out(y, x) = sum / static_cast<double>(c);
    }
  }
  return out;
}

}  // namespace

const char* to_string(Intent intent) {
  switch (intent) {
    case Intent::kSeg:
      return "seg";
    case Intent::kFollowup:
      return "followup";
    case Intent::kDialogue:
      break;
  }
  return "dialogue";
}

Intent route_intent(const std::string& instruction, bool memory_populated) {
  const std::vector<std::string> words = words_of(instruction);
  std::string normalized = " ";
  for (const std::string& w : words) normalized += w + " ";

  if (has_word(words, "segment") || has_word(words, "mask") || has_word(words, "outline") ||
      has_phrase(normalized, "highlight the region")) {
    return Intent::kSeg;
  }
  if (has_phrase(normalized, "the segmented") || has_phrase(normalized, "that region") ||
      (memory_populated && has_word(words, "it"))) {
    return Intent::kFollowup;
  }
  return Intent::kDialogue;
}

StubAgent::StubAgent(std::size_t grid_h, std::size_t grid_w, std::size_t dim, std::uint64_t seed)
    : grid_h_(grid_h), grid_w_(grid_w), dim_(dim), seed_(seed) {
  if (grid_h == 0 || grid_w == 0 || dim == 0) throw std::invalid_argument("stub agent: empty shape");
}

Intent StubAgent::route(const std::string& instruction, const Image*, const SessionMemory& memory) {
  return route_intent(instruction, memory.populated());
}

Tensor StubAgent::word_vector(const std::string& word) const {
  Rng rng(derive_seed(seed_, fnv1a(word)));
  return gaussian({1, dim_}, 1.0, rng);
}

head::HeadInput StubAgent::embed(const std::string& instruction, const Image& image) {
  const Tensor& px = image.pixels;
  require_image(px);
  const std::size_t h = px.dim(0), w = px.dim(1), c = channels_of(px);
  if (h < grid_h_ || w < grid_w_) throw std::invalid_argument("stub agent: image smaller than the grid");
  Rng rng(derive_seed(seed_, 0x1a6e + c));
  const Tensor projection = gaussian({c + 1, dim_}, 1.0, rng);  // last row: bias

  Tensor features = Tensor::matrix(grid_h_ * grid_w_, dim_);
  for (std::size_t gy = 0; gy < grid_h_; ++gy) {
    const std::size_t y0 = gy * h / grid_h_, y1 = (gy + 1) * h / grid_h_;
    for (std::size_t gx = 0; gx < grid_w_; ++gx) {
      const std::size_t x0 = gx * w / grid_w_, x1 = (gx + 1) * w / grid_w_;
      const double inv = 1.0 / static_cast<double>((y1 - y0) * (x1 - x0));
      auto row = features.row(gy * grid_w_ + gx);
      for (std::size_t k = 0; k <= c; ++k) {
        double mean = 1.0;
        if (k < c) {
          mean = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t x = x0; x < x1; ++x) mean += pixel(px, y, x, k);
          }
          mean *= inv;
        }
        for (std::size_t j = 0; j < dim_; ++j) row[j] += mean * projection(k, j);
      }
    }
  }

  Tensor query = Tensor::matrix(1, dim_);
  const std::vector<std::string> words = words_of(instruction);
  for (const std::string& word : words) {
    const Tensor v = word_vector(word);
    for (std::size_t j = 0; j < dim_; ++j) query[j] += v[j] / static_cast<double>(words.size());
  }
  const Tensor suffix = word_vector("<SEG>");
  Tensor text = Tensor::matrix(2, dim_);
  for (std::size_t j = 0; j < dim_; ++j) {
    text(0, j) = query[j];
    text(1, j) = query[j] + suffix[j];
  }
  return {std::move(features), std::move(text), grid_h_, grid_w_};
}

std::string StubAgent::generate(const std::string& instruction, const Tensor& context) {
  std::string reply = "Answer to \"" + instruction + "\"";
  if (!context.empty()) reply += " given a " + shape_string(context.dims()) + " view";
  return reply + ".";
}

PipelineSegmenter::PipelineSegmenter(Model model, std::size_t channels, std::uint64_t encoder_seed)
    : model_(std::move(model)),
      encoder_(decoder::kDefaultUpsample, channels, model_.config.prompt_dim, encoder_seed),
      channels_(channels) {}

Tensor PipelineSegmenter::segment(const head::HeadInput& input, const Image& image) {
  const Tensor& px = image.pixels;
  require_image(px);
  if (channels_of(px) != channels_) {
    throw std::invalid_argument("segmenter expects " + std::to_string(channels_) + " channels");
  }
  const std::size_t h = px.dim(0), w = px.dim(1);
  const std::size_t eh = encoder_.patch() * model_.config.grid_h;
  const std::size_t ew = encoder_.patch() * model_.config.grid_w;
  Tensor resized({eh, ew, channels_});
  for (std::size_t y = 0; y < eh; ++y) {
    const std::size_t sy = (2 * y + 1) * h / (2 * eh);
    for (std::size_t x = 0; x < ew; ++x) {
      const std::size_t sx = (2 * x + 1) * w / (2 * ew);
      for (std::size_t k = 0; k < channels_; ++k) resized(y, x, k) = pixel(px, sy, sx, k);
    }
  }
  const Tensor logits = run_pipeline(model_, input, encoder_.encode(resized)).mask.logits;
  return nearest_resample(objectives::sigmoid(logits), h, w);
}

namespace {

TurnResult turn(AgentPort& agent, SegmentationPort& segmenter, SessionMemory& memory,
                const std::string& instruction, const Image* image, int depth) {
  Intent intent = agent.route(instruction, image, memory);
  if (intent == Intent::kFollowup && !memory.populated()) {
    if (depth == 0) return turn(agent, segmenter, memory, instruction, image, depth + 1);
    intent = Intent::kDialogue;
  }

  TurnResult result;
  result.intent = intent;
  result.depth = depth;
  switch (intent) {
    case Intent::kSeg: {
      if (image == nullptr) throw std::invalid_argument("segmentation requires an image");
      const head::HeadInput input = agent.embed(instruction, *image);
      Tensor mask = segmenter.segment(input, *image);
      result.overlay = overlay(image->pixels, mask);
      result.mask = mask;
      memory.last = StoredResult{*image, std::move(mask)};
      result.reply = kSegReply;
      break;
    }
    case Intent::kFollowup: {
      const StoredResult& last = *memory.last;
      const Tensor g = grey(last.image.pixels);
      const Tensor o = overlay(last.image.pixels, last.mask);
      Tensor context({g.dim(0), 2 * g.dim(1)});
      for (std::size_t y = 0; y < g.dim(0); ++y) {
        for (std::size_t x = 0; x < g.dim(1); ++x) {
          context(y, x) = g(y, x);
          context(y, g.dim(1) + x) = o(y, x);
        }
      }
      result.reply = agent.generate(instruction, context);
      break;
    }
    case Intent::kDialogue:
      result.reply = agent.generate(instruction, image ? image->pixels : Tensor());
      break;
  }
  return result;
}

}  // namespace

TurnResult handle_turn(AgentPort& agent, SegmentationPort& segmenter, SessionMemory& memory,
                       const std::string& instruction, const Image* image) {
  return turn(agent, segmenter, memory, instruction, image, 0);
}

Tensor overlay(const Tensor& pixels, const Tensor& mask) {
  Tensor out = grey(pixels);
  require_same_shape(out, mask, "overlay");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * out[i] + 0.5 * mask[i];
  return out;
}

Tensor triptych(const Tensor& pixels, const Tensor& mask) {
  const Tensor g = grey(pixels);
  const Tensor o = overlay(pixels, mask);
  const std::size_t h = g.dim(0), w = g.dim(1);
  Tensor out({h, 3 * w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      out(y, x) = g(y, x);
      out(y, w + x) = mask(y, x);
      out(y, 2 * w + x) = o(y, x);
    }
  }
  return out;
}

void export_triptych(const Tensor& pixels, const Tensor& mask, const std::filesystem::path& path) {
  io::export_pgm(triptych(pixels, mask), path);
}

std::vector<std::string> parse_script(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    lines.push_back(line.substr(first, last - first + 1));
  }
  return lines;
}

}  // namespace lens::agent
