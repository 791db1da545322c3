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

#include <fstream>
#include <random>

#include "gtest/gtest.h"
#include "rvos/png_io.hpp"
#include "test_support.hpp"

namespace rvos {
namespace {

using testing::TempDir;

TEST(PngIoTest, ExhaustiveThreeByThreeRoundTrip) {
  TempDir dir;
  for (std::uint64_t code = 0; code < 512; ++code) {
    const auto m = testing::mask_from_code(3, 3, code);
    const auto path = dir.path() / "m.png";
    write_mask_png(path, m);
    ASSERT_EQ(read_mask_png(path), m) << code;
  }
}

TEST(PngIoTest, RandomRoundTripAndDeterministicBytes) {
  TempDir dir;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = testing::random_mask(rng, 48, 64, 0.3);
    write_mask_png(dir.path() / "a" / "x.png", m);
    write_mask_png(dir.path() / "b" / "x.png", m);
    ASSERT_EQ(read_mask_png(dir.path() / "a" / "x.png"), m);
    ASSERT_EQ(testing::snapshot_tree(dir.path() / "a"), testing::snapshot_tree(dir.path() / "b"));
  }
}

// Fixture PNGs are 8-bit grayscale written by another encoder.
TEST(PngIoTest, ReadsExternalGrayscale) {
  const auto m = read_mask_png(testing::fixture_dir() / "gt" / "vid_a" / "1" / "00000.png");
  EXPECT_EQ(m.height(), 24U);
  EXPECT_EQ(m.width(), 32U);
  EXPECT_EQ(m, testing::rect_mask(24, 32, 2, 2, 5, 5));
}

TEST(PngIoTest, MissingAndCorruptFiles) {
  TempDir dir;
  EXPECT_THROW(read_mask_png(dir.path() / "nope.png"), Error);
  {
    std::ofstream out(dir.path() / "bad.png", std::ios::binary);
    out << "not a png at all";
  }
  try {
    read_mask_png(dir.path() / "bad.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
    EXPECT_NE(std::string(e.what()).find("bad.png"), std::string::npos);
  }
}

TEST(PngIoTest, WritesPaletteIndicesZeroAnd255) {
  TempDir dir;
  const auto path = dir.path() / "p.png";
  write_mask_png(path, testing::rect_mask(2, 2, 0, 0, 1, 1));
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  // IHDR: bit depth 8, color type 3 (palette).
  ASSERT_GT(bytes.size(), 26U);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 8);
  EXPECT_EQ(static_cast<unsigned char>(bytes[25]), 3);
  EXPECT_NE(bytes.find("PLTE"), std::string::npos);
}

}  // namespace
}  // namespace rvos
