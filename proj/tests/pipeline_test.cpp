// Copyright 2026 The rvoskit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <map>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "rvos/pipeline.hpp"
#include "test_support.hpp"

namespace rvos {
namespace {

using testing::TempDir;

// Returns the same fixed mask for every key frame and counts calls.
class ConstantSegmenter : public SegmenterOracle {
 public:
  explicit ConstantSegmenter(BinaryMask m) : mask_(std::move(m)) {}
  std::vector<BinaryMask> segment(std::span<const FrameRef> frames, std::string_view) const override {
    ++calls;
    seen.assign(frames.begin(), frames.end());
    return std::vector<BinaryMask>(frames.size(), mask_);
  }
  mutable int calls = 0;
  mutable std::vector<FrameRef> seen;

 private:
  BinaryMask mask_;
};

class ShortSegmenter : public SegmenterOracle {
 public:
  std::vector<BinaryMask> segment(std::span<const FrameRef>, std::string_view) const override {
    return {BinaryMask(2, 2)};
  }
};

class FailingPropagator : public PropagatorOracle {
 public:
  MemoryState init(const std::map<std::size_t, BinaryMask>&) const override { return {}; }
  MemoryState anchor(MemoryState m, const FrameRef&, const BinaryMask&) const override { return m; }
  std::pair<BinaryMask, MemoryState> step(MemoryState, const FrameRef&) const override {
    throw runtime_error("backend exploded");
  }
};

std::vector<double> per_frame_iou(const MaskSequence& a, const MaskSequence& b) {
  std::vector<double> out;
  for (std::size_t t = 0; t < a.size(); ++t) out.push_back(testing::oracle_iou(a.mask(t), b.mask(t)));
  return out;
}

TEST(RunPipelineTest, SingleFrame) {
  const auto video = testing::make_video("v", 1);
  const auto gt = testing::static_object(1);
  ConstantSegmenter seg(testing::rect_mask(16, 16, 0, 0, 3, 3));
  const auto prop = make_nearest_key_propagator();
  const auto out = run_pipeline(video, video.expressions[0], seg, *prop, {1, SamplingStrategy::uniform});
  ASSERT_EQ(out.size(), 1U);
  EXPECT_EQ(out.mask(0), testing::rect_mask(16, 16, 0, 0, 3, 3));
}

TEST(RunPipelineTest, StaticVideoReproducedExactly) {
  const auto video = testing::make_video("v", 10);
  const auto gt = testing::static_object(10);
  const auto seg = make_gt_noise_segmenter(gt, 0.0, 1);
  const auto prop = make_nearest_key_propagator();
  EXPECT_EQ(run_pipeline(video, video.expressions[0], *seg, *prop, {5, SamplingStrategy::uniform}), gt);
}

TEST(RunPipelineTest, MovingObjectExactOnlyAtKeyFrames) {
  const auto video = testing::make_video("v", 10);
  const auto gt = testing::moving_object(10);
  const auto seg = make_gt_noise_segmenter(gt, 0.0, 1);
  const auto prop = make_nearest_key_propagator();
  const auto out = run_pipeline(video, video.expressions[0], *seg, *prop, {5, SamplingStrategy::uniform});
  const auto ious = per_frame_iou(out, gt);
  const std::set<std::size_t> keys{0, 2, 5, 7, 9};
  for (std::size_t t = 0; t < 10; ++t) {
    if (keys.contains(t)) {
      EXPECT_EQ(ious[t], 1.0) << t;
    } else {
      EXPECT_LT(ious[t], 1.0) << t;
    }
  }
}

TEST(RunPipelineTest, SegmenterSeesSampledKeyFramesAndExpression) {
  const auto video = testing::make_video("v", 10);
  ConstantSegmenter seg(BinaryMask(4, 4));
  const auto prop = make_nearest_key_propagator();
  run_pipeline(video, video.expressions[0], seg, *prop, {5, SamplingStrategy::first_k});
  EXPECT_EQ(seg.calls, 1);
  ASSERT_EQ(seg.seen.size(), 5U);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(seg.seen[i].index, i);
    EXPECT_EQ(seg.seen[i].name, video.frame_names[i]);
  }
}

TEST(RunPipelineTest, NearestKeyTieGoesToEarlierKey) {
  // N=5, M=3 -> keys 0, 2, 4; frame 1 and 3 sit exactly between two keys.
  const auto video = testing::make_video("v", 5);
  const auto gt = testing::moving_object(5);
  const auto seg = make_gt_noise_segmenter(gt, 0.0, 1);
  const auto prop = make_nearest_key_propagator();
  const auto out = run_pipeline(video, video.expressions[0], *seg, *prop, {3, SamplingStrategy::uniform});
  EXPECT_EQ(out.mask(1), gt.mask(0));
  EXPECT_EQ(out.mask(3), gt.mask(2));
}

TEST(RunPipelineTest, SegmenterCountMismatchIsError) {
  const auto video = testing::make_video("v", 6);
  ShortSegmenter seg;
  const auto prop = make_nearest_key_propagator();
  EXPECT_THROW(run_pipeline(video, video.expressions[0], seg, *prop, {3, SamplingStrategy::uniform}), Error);
}

TEST(RunPipelineTest, BackendFailureCarriesFrameContext) {
  const auto video = testing::make_video("v", 4);
  ConstantSegmenter seg(BinaryMask(2, 2));
  FailingPropagator prop;
  try {
    run_pipeline(video, video.expressions[0], seg, prop, {1, SamplingStrategy::uniform});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::runtime);
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("backend exploded"), std::string::npos);
  }
}

TEST(GtNoiseSegmenterTest, ZeroAndFullFlip) {
  const auto gt = testing::moving_object(4);
  const auto video = testing::make_video("v", 4);
  const auto refs = frame_refs(video, std::vector<std::size_t>{0, 1, 2, 3});
  const auto exact = make_gt_noise_segmenter(gt, 0.0, 9)->segment(refs, "x");
  const auto inverted = make_gt_noise_segmenter(gt, 1.0, 9)->segment(refs, "x");
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(exact[t], gt.mask(t));
    EXPECT_EQ(inverted[t], complement(gt.mask(t)));
  }
}

// 256 pixels at rate 0.1: mean 25.6, sd sqrt(256 * 0.1 * 0.9) = 4.8.
TEST(GtNoiseSegmenterTest, FlipCountWithinThreeSigma) {
  const auto gt = testing::make_sequence(1, [](std::size_t) { return testing::rect_mask(16, 16, 4, 4, 8, 8); });
  const auto video = testing::make_video("v", 1);
  const auto refs = frame_refs(video, std::vector<std::size_t>{0});
  const auto noisy = make_gt_noise_segmenter(gt, 0.1, 7)->segment(refs, "x");
  const auto d = hamming_distance(noisy[0], gt.mask(0));
  EXPECT_GE(d, 13U);
  EXPECT_LE(d, 39U);
}

TEST(GtNoiseSegmenterTest, FrameDrawIndependentOfRequestSet) {
  const auto gt = testing::moving_object(6);
  const auto video = testing::make_video("v", 6);
  const auto seg = make_gt_noise_segmenter(gt, 0.3, 5);
  const auto all = seg->segment(frame_refs(video, std::vector<std::size_t>{0, 1, 2, 3, 4, 5}), "x");
  const auto some = seg->segment(frame_refs(video, std::vector<std::size_t>{3}), "x");
  EXPECT_EQ(all[3], some[0]);
  EXPECT_NE(all[2], all[3]);
}

TEST(GtNoiseSegmenterTest, RejectsBadRateAndMisnamedFrames) {
  EXPECT_THROW(make_gt_noise_segmenter(testing::static_object(2), 1.5, 0), Error);
  const auto seg = make_gt_noise_segmenter(testing::static_object(2), 0.0, 0);
  const std::vector<FrameRef> wrong{{"v", 0, "99999"}};
  EXPECT_THROW(seg->segment(wrong, "x"), Error);
}

TEST(PrecomputedSegmenterTest, ServesStoredMasks) {
  const auto root = testing::fixture_dir() / "pred";
  const auto index = load_index(testing::fixture_dir() / "meta_expressions.json");
  const auto& video = index.videos.at("vid_a");
  const auto seg = make_precomputed_segmenter(root, "vid_a", "0");
  const auto two = seg->segment(frame_refs(video, std::vector<std::size_t>{0, 2}), "x");
  ASSERT_EQ(two.size(), 2U);
  EXPECT_EQ(two[0], read_mask_png(mask_path(root, "vid_a", "0", "00000")));
  EXPECT_EQ(two[1], read_mask_png(mask_path(root, "vid_a", "0", "00002")));

  const auto stored = load_sequence(root, video, "0", MaskSource::prediction);
  const auto all = seg->segment(frame_refs(video, std::vector<std::size_t>{0, 1, 2, 3, 4}), "x");
  for (std::size_t t = 0; t < stored.size(); ++t) EXPECT_EQ(all[t], stored.mask(t));
}

TEST(PrecomputedSegmenterTest, MissingFrameNamesPath) {
  const auto seg = make_precomputed_segmenter(testing::fixture_dir() / "pred", "vid_a", "0");
  const std::vector<FrameRef> refs{{"vid_a", 7, "00007"}};
  try {
    seg->segment(refs, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("00007.png"), std::string::npos);
  }
}

TEST(DecayNoisePropagatorTest, NoiseGrowsWithDistanceFromAnchor) {
  const std::size_t n = 40;
  const auto video = testing::make_video("v", n);
  const auto gt = testing::make_sequence(n, [](std::size_t) { return testing::rect_mask(32, 32, 8, 8, 16, 16); });
  const auto seg = make_gt_noise_segmenter(gt, 0.0, 0);
  const auto prop = make_decay_noise_propagator(gt, 0.0, 0.01, 3);
  const auto out = run_pipeline(video, video.expressions[0], *seg, *prop, {1, SamplingStrategy::first_k});
  EXPECT_EQ(out.mask(0), gt.mask(0));
  EXPECT_LT(hamming_distance(out.mask(2), gt.mask(2)), hamming_distance(out.mask(39), gt.mask(39)));
  // Same seed, same frames.
  const auto again = run_pipeline(video, video.expressions[0], *seg, *make_decay_noise_propagator(gt, 0.0, 0.01, 3),
                                  {1, SamplingStrategy::first_k});
  EXPECT_EQ(out, again);
}

TEST(MemoryStateTest, WindowBoundsRecentMasksAndSerializes) {
  const auto video = testing::make_video("v", 10);
  const auto prop = make_nearest_key_propagator(3);
  std::map<std::size_t, BinaryMask> keys{{0, BinaryMask(2, 2)}, {9, BinaryMask(2, 2)}};
  auto memory = prop->init(keys);
  memory = prop->anchor(std::move(memory), {"v", 0, "00000"}, keys.at(0));
  for (std::size_t t = 1; t < 6; ++t) memory = prop->step(std::move(memory), {"v", t, video.frame_names[t]}).second;
  EXPECT_EQ(memory.recent.size(), 3U);
  EXPECT_EQ(memory.recent.front().first, 3U);
  const auto j = memory.to_json();
  EXPECT_EQ(j["last_anchor"], 0);
  EXPECT_EQ(j["anchors"].size(), 2U);
  EXPECT_EQ(j["window"], 3);
}

TEST(BackendSpecTest, ParsesSegmenterSpecs) {
  const auto noisy = parse_segmenter_spec("gt-noise:0.1:seed=7");
  EXPECT_EQ(noisy.kind, SegmenterSpec::Kind::gt_noise);
  EXPECT_DOUBLE_EQ(noisy.flip_rate, 0.1);
  EXPECT_EQ(noisy.seed, 7U);
  EXPECT_DOUBLE_EQ(parse_segmenter_spec("gt").flip_rate, 0.0);
  EXPECT_EQ(parse_segmenter_spec("precomputed:/a:b").root, "/a:b");
  EXPECT_THROW(parse_segmenter_spec("gt-noise"), Error);
  EXPECT_THROW(parse_segmenter_spec("gt-noise:abc"), Error);
  EXPECT_THROW(parse_segmenter_spec("gt-noise:2"), Error);
  EXPECT_THROW(parse_segmenter_spec("gt-noise:0.1:colour=red"), Error);
  EXPECT_THROW(parse_segmenter_spec("sam"), Error);
  EXPECT_THROW(parse_segmenter_spec("precomputed:"), Error);
}

TEST(BackendSpecTest, ParsesPropagatorSpecs) {
  EXPECT_EQ(parse_propagator_spec("nearest-key").kind, PropagatorSpec::Kind::nearest_key);
  EXPECT_EQ(parse_propagator_spec("nearest-key:window=3").window, 3U);
  const auto decay = parse_propagator_spec("decay-noise:0.01:0.002:seed=4:window=2");
  EXPECT_EQ(decay.kind, PropagatorSpec::Kind::decay_noise);
  EXPECT_DOUBLE_EQ(decay.base_rate, 0.01);
  EXPECT_DOUBLE_EQ(decay.growth, 0.002);
  EXPECT_EQ(decay.seed, 4U);
  EXPECT_EQ(decay.window, 2U);
  EXPECT_THROW(parse_propagator_spec("decay-noise:0.1"), Error);
  EXPECT_THROW(parse_propagator_spec("nearest-key:seed=1"), Error);
  EXPECT_THROW(parse_propagator_spec("cross-attention"), Error);
}

TEST(SeedingTest, UnitSeedsAreStableAndDistinct) {
  EXPECT_EQ(unit_seed(7, "vid", "0"), unit_seed(7, "vid", "0"));
  EXPECT_NE(unit_seed(7, "vid", "0"), unit_seed(7, "vid", "1"));
  EXPECT_NE(unit_seed(7, "vid", "0"), unit_seed(8, "vid", "0"));
  // FNV-1a reference value for the empty string.
  EXPECT_EQ(fnv1a64(""), 0xCBF29CE484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xAF63DC4C8601EC8CULL);
}

}  // namespace
}  // namespace rvos
