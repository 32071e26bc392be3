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

#include <gtest/gtest.h>

#include "lens/synthetic.hpp"

namespace lens::agent {
namespace {

// Counts calls and returns a fixed mask, so turn logic is observable
// without running a model.
class CountingSegmenter : public SegmentationPort {
 public:
  Tensor segment(const head::HeadInput&, const Image& image) override {
    ++calls;
    Tensor m({image.pixels.dim(0), image.pixels.dim(1)});
    m[0] = 1.0;
    return m;
  }
  int calls = 0;
};

class CountingAgent : public StubAgent {
 public:
  CountingAgent() : StubAgent(4, 4, 8, 1) {}
  Intent route(const std::string& u, const Image* image, const SessionMemory& memory) override {
    ++routes;
    return StubAgent::route(u, image, memory);
  }
  int routes = 0;
};

Image test_image() {
  Tensor px({8, 8, 2});
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>(i % 5) / 4.0;
  return {"img", px};
}

TEST(RouteIntent, RuleTableExamples) {
  EXPECT_EQ(route_intent("segment the dog", false), Intent::kSeg);
  EXPECT_EQ(route_intent("what color is the segmented object?", false), Intent::kFollowup);
  EXPECT_EQ(route_intent("how many chairs are there?", false), Intent::kDialogue);
}

TEST(RouteIntent, WholeWordsAndMemoryGate) {
  EXPECT_EQ(route_intent("Please MASK the cat.", false), Intent::kSeg);
  EXPECT_EQ(route_intent("Highlight the region with the car", true), Intent::kSeg);
  EXPECT_EQ(route_intent("tell me about masks", false), Intent::kDialogue);
  EXPECT_EQ(route_intent("is it large?", false), Intent::kDialogue);
  EXPECT_EQ(route_intent("is it large?", true), Intent::kFollowup);
  EXPECT_EQ(route_intent("describe that region", false), Intent::kFollowup);
  EXPECT_STREQ(to_string(Intent::kFollowup), "followup");
}

TEST(HandleTurn, SegStoresMaskAndRepliesFixedString) {
  CountingAgent agent;
  CountingSegmenter seg;
  SessionMemory memory;
  const Image img = test_image();
  const TurnResult r = handle_turn(agent, seg, memory, "segment the dog", &img);
  EXPECT_EQ(r.intent, Intent::kSeg);
  EXPECT_EQ(r.reply, "Sure, the segmentation result is generated.");
  ASSERT_TRUE(r.mask.has_value());
  ASSERT_TRUE(r.overlay.has_value());
  ASSERT_TRUE(memory.populated());
  EXPECT_EQ(memory.last->mask, *r.mask);
  EXPECT_EQ(memory.last->image.id, "img");
  EXPECT_EQ(r.depth, 0);
}

TEST(HandleTurn, SegWithoutImageThrows) {
  CountingAgent agent;
  CountingSegmenter seg;
  SessionMemory memory;
  try {
    handle_turn(agent, seg, memory, "segment the dog", nullptr);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "segmentation requires an image");
  }
  EXPECT_FALSE(memory.populated());
}

TEST(HandleTurn, DialogueLeavesMemoryUnchanged) {
  CountingAgent agent;
  CountingSegmenter seg;
  SessionMemory memory;
  const Image img = test_image();
  handle_turn(agent, seg, memory, "segment the dog", &img);
  const Tensor stored = memory.last->mask;
  const TurnResult r = handle_turn(agent, seg, memory, "how many chairs are there?", &img);
  EXPECT_EQ(r.intent, Intent::kDialogue);
  EXPECT_FALSE(r.mask.has_value());
  EXPECT_EQ(memory.last->mask, stored);
  EXPECT_EQ(seg.calls, 1);
}

TEST(HandleTurn, FollowupSeesImageAndOverlay) {
  CountingAgent agent;
  CountingSegmenter seg;
  SessionMemory memory;
  const Image img = test_image();
  handle_turn(agent, seg, memory, "segment the dog", &img);
  const TurnResult r = handle_turn(agent, seg, memory, "what color is the segmented object?", nullptr);
  EXPECT_EQ(r.intent, Intent::kFollowup);
  EXPECT_NE(r.reply.find("[8x16]"), std::string::npos) << r.reply;
  EXPECT_EQ(seg.calls, 1);
}

TEST(HandleTurn, FollowupOnEmptyMemoryReentersOnce) {
  CountingAgent agent;
  CountingSegmenter seg;
  SessionMemory memory;
  const TurnResult r = handle_turn(agent, seg, memory, "what color is the segmented object?", nullptr);
  EXPECT_EQ(r.intent, Intent::kDialogue);
  EXPECT_EQ(r.depth, 1);
  EXPECT_EQ(agent.routes, 2);
  EXPECT_FALSE(memory.populated());
  EXPECT_EQ(seg.calls, 0);
}

TEST(StubAgent, EmbedShapesAndDeterminism) {
  StubAgent a(4, 4, 8, 3), b(4, 4, 8, 3);
  const Image img = test_image();
  const head::HeadInput x = a.embed("segment the dog", img);
  EXPECT_EQ(x.image_features.dims(), (std::vector<std::size_t>{16, 8}));
  EXPECT_EQ(x.text_features.dims(), (std::vector<std::size_t>{2, 8}));
  EXPECT_EQ(x.image_features, b.embed("segment the dog", img).image_features);
  EXPECT_NE(x.text_features, a.embed("segment the cat", img).text_features);
  EXPECT_EQ(a.generate("hi", Tensor()), "Answer to \"hi\".");
}

TEST(PipelineSegmenter, MaskMatchesImageSize) {
  synth::FitConfig c = synth::FitConfig::blob_defaults();
  c.model.model_dim = c.model.prompt_dim = 8;
  c.model.grid_h = c.model.grid_w = 4;
  StubAgent agent(4, 4, 8, 1);
  PipelineSegmenter seg(init_model(c.model, 2), 2, 3);
  const Image img = test_image();
  const Tensor mask = seg.segment(agent.embed("segment it", img), img);
  EXPECT_EQ(mask.dims(), (std::vector<std::size_t>{8, 8}));
  for (double v : mask.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  Image wrong = img;
  wrong.pixels = Tensor({8, 8, 3});
  EXPECT_THROW(seg.segment(agent.embed("segment it", wrong), wrong), std::invalid_argument);
}

TEST(Overlay, BlendAndTriptych) {
  const Tensor grey({2, 2}, 0.4);
  const Tensor mask({2, 2}, std::vector<double>{1.0, 0.0, 0.0, 1.0});
  const Tensor o = overlay(grey, mask);
  EXPECT_DOUBLE_EQ(o[0], 0.7);
  EXPECT_DOUBLE_EQ(o[1], 0.2);
  const Tensor t = triptych(grey, mask);
  ASSERT_EQ(t.dims(), (std::vector<std::size_t>{2, 6}));
  EXPECT_EQ(t(0, 0), 0.4);
  EXPECT_EQ(t(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(t(1, 5), 0.7);
}

TEST(Script, SkipsBlankAndCommentLines) {
  const auto lines = parse_script("# session\n  segment the dog  \n\n\twhat color is the segmented object?\r\n# end\n");
  EXPECT_EQ(lines, (std::vector<std::string>{"segment the dog", "what color is the segmented object?"}));
}

}  // namespace
}  // namespace lens::agent
