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

#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "rvos/dataset.hpp"
#include "test_support.hpp"

namespace rvos {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

fs::path write_meta(const TempDir& dir, const std::string& text) {
  const auto path = dir.path() / "meta_expressions.json";
  std::ofstream(path) << text;
  return path;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(LoadIndexTest, FixtureCounts) {
  const auto index = load_index(testing::fixture_dir() / "meta_expressions.json");
  EXPECT_EQ(index.split_name, "fixture");
  ASSERT_EQ(index.videos.size(), 2U);
  EXPECT_EQ(dataset_stats(index), (DatasetStats{2, 3, 11}));
  const auto& a = index.videos.at("vid_a");
  EXPECT_EQ(a.frame_names.front(), "00000");
  ASSERT_EQ(a.expressions.size(), 2U);
  EXPECT_EQ(a.expressions[1].text, "the square that never moves");
  EXPECT_EQ(a.expressions[1].object_ids, std::vector<int>{1});
}

TEST(LoadIndexTest, EmptyVideos) {
  TempDir dir;
  const auto index = load_index(write_meta(dir, R"({"videos": {}})"));
  EXPECT_TRUE(index.videos.empty());
  EXPECT_EQ(dataset_stats(index), (DatasetStats{0, 0, 0}));
}

TEST(LoadIndexTest, DuplicateExpressionIdIsNamed) {
  TempDir dir;
  const auto path = write_meta(dir, R"({"videos": {"v": {"frames": ["0"],
      "expressions": {"7": {"exp": "a"}, "7": {"exp": "b"}}}}})");
  EXPECT_NE(error_of([&] { load_index(path); }).find("'7'"), std::string::npos);
}

TEST(LoadIndexTest, DuplicateVideoIdIsNamed) {
  TempDir dir;
  const auto path = write_meta(dir, R"({"videos": {
      "clip": {"frames": ["0"], "expressions": {}},
      "clip": {"frames": ["1"], "expressions": {}}}})");
  EXPECT_NE(error_of([&] { load_index(path); }).find("'clip'"), std::string::npos);
}

TEST(LoadIndexTest, ValidationErrors) {
  TempDir dir;
  EXPECT_THROW(load_index(dir.path() / "missing.json"), Error);
  EXPECT_THROW(load_index(write_meta(dir, "{not json")), Error);
  EXPECT_THROW(load_index(write_meta(dir, R"({"vids": {}})")), Error);
  EXPECT_NE(error_of([&] { load_index(write_meta(dir, R"({"videos": {"v1": {"expressions": {}}}})")); })
                .find("v1"),
            std::string::npos);
  EXPECT_NE(error_of([&] {
              load_index(write_meta(dir, R"({"videos": {"v": {"frames": ["0"],
                  "expressions": {"e9": {"obj_id": [1]}}}}})"));
            }).find("e9"),
            std::string::npos);
  EXPECT_THROW(load_index(write_meta(dir, R"({"videos": {"v": {"frames": ["0"],
      "expressions": {"0": {"exp": ""}}}}})")),
               Error);
  EXPECT_THROW(load_index(write_meta(dir, R"({"videos": {"v": {"frames": [],
      "expressions": {}}}})")),
               Error);
}

TEST(LoadIndexTest, FrameOrderingRules) {
  TempDir dir;
  const auto sorted = load_index(write_meta(dir, R"({"videos": {"v": {"frames": ["00002", "00000", "00001"],
      "expressions": {}}}})"));
  EXPECT_EQ(sorted.videos.at("v").frame_names, (std::vector<std::string>{"00000", "00001", "00002"}));
  EXPECT_THROW(load_index(write_meta(dir, R"({"videos": {"v": {"frames": ["9", "10"],
      "expressions": {}}}})")),
               Error);
  EXPECT_THROW(load_index(write_meta(dir, R"({"videos": {"v": {"frames": ["00001", "00001"],
      "expressions": {}}}})")),
               Error);
}

TEST(LoadIndexTest, ObjectIdsOptionalAndScalarAccepted) {
  TempDir dir;
  const auto index = load_index(write_meta(dir, R"({"videos": {"v": {"frames": ["0"],
      "expressions": {"0": {"exp": "a"}, "1": {"exp": "b", "obj_id": 4}}}}})"));
  const auto& e = index.videos.at("v").expressions;
  EXPECT_TRUE(e[0].object_ids.empty());
  EXPECT_EQ(e[1].object_ids, std::vector<int>{4});
}

TEST(WriteIndexTest, RoundTripIsIdentity) {
  TempDir dir;
  const auto index = load_index(testing::fixture_dir() / "meta_expressions.json");
  write_index(index, dir.path() / "copy" / "meta.json");
  EXPECT_EQ(load_index(dir.path() / "copy" / "meta.json"), index);
}

TEST(MaskTreeTest, LoadsCompleteFixture) {
  const auto index = load_index(testing::fixture_dir() / "meta_expressions.json");
  const auto tree = load_mask_tree(testing::fixture_dir() / "gt", index, MaskSource::ground_truth, 2);
  ASSERT_EQ(tree.size(), 3U);
  for (const auto& [key, seq] : tree) {
    EXPECT_EQ(seq.frame_names(), index.videos.at(key.first).frame_names) << key_string(key);
  }
  EXPECT_TRUE(tree.at({"vid_b", "0"}).mask(5).empty());
}

TEST(MaskTreeTest, MissingFrameIsNamed) {
  TempDir dir;
  fs::copy(testing::fixture_dir(), dir.path(), fs::copy_options::recursive);
  fs::remove(dir.path() / "gt" / "vid_b" / "0" / "00003.png");
  const auto index = load_index(dir.path() / "meta_expressions.json");
  const auto message = error_of([&] { load_mask_tree(dir.path() / "gt", index, MaskSource::ground_truth); });
  EXPECT_NE(message.find("vid_b"), std::string::npos);
  EXPECT_NE(message.find("'0'"), std::string::npos);
  EXPECT_NE(message.find("00003"), std::string::npos);
}

TEST(MaskTreeTest, MismatchedResolutionIsDimensionError) {
  TempDir dir;
  fs::copy(testing::fixture_dir(), dir.path(), fs::copy_options::recursive);
  write_mask_png(dir.path() / "pred" / "vid_a" / "1" / "00004.png", BinaryMask(10, 10));
  const auto index = load_index(dir.path() / "meta_expressions.json");
  const auto message = error_of([&] { load_mask_tree(dir.path() / "pred", index, MaskSource::prediction); });
  EXPECT_NE(message.find("dimension mismatch"), std::string::npos);
  EXPECT_NE(message.find("00004.png"), std::string::npos);
}

TEST(MaskTreeTest, MissingRoot) {
  const auto index = load_index(testing::fixture_dir() / "meta_expressions.json");
  EXPECT_THROW(load_mask_tree("/nonexistent/root", index, MaskSource::prediction), Error);
}

TEST(MaskTreeTest, WriteThenLoadIsIdentity) {
  TempDir dir;
  const auto index = load_index(testing::fixture_dir() / "meta_expressions.json");
  const auto tree = load_mask_tree(testing::fixture_dir() / "pred", index, MaskSource::prediction);
  write_mask_tree(dir.path(), tree, 3);
  EXPECT_EQ(load_mask_tree(dir.path(), index, MaskSource::prediction), tree);
}

}  // namespace
}  // namespace rvos
