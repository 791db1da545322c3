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

#ifndef RVOS_MASK_HPP_
#define RVOS_MASK_HPP_

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rvos/error.hpp"

namespace rvos {

// Single-frame foreground/background raster. Pixels are packed row-major
// into 64-bit words, pixel i living in bit (i % 64) of word (i / 64). Bits
// past height*width are always zero, which the word-level kernels rely on.
class BinaryMask {
 public:
  using Word = std::uint64_t;
  static constexpr std::size_t kWordBits = 64;

  BinaryMask(std::size_t height, std::size_t width)
      : height_(height), width_(width) {
    if (height == 0 || width == 0) {
      throw validation_error("mask dimensions must be positive, got " +
                             shape_string(height, width));
    }
    words_.assign((height * width + kWordBits - 1) / kWordBits, 0);
  }

  // Builds a mask from one byte per pixel, row-major; nonzero is foreground.
  static BinaryMask from_indicator(std::size_t height, std::size_t width,
                                   std::span<const std::uint8_t> pixels) {
    BinaryMask mask(height, width);
    if (pixels.size() != mask.size()) {
      throw validation_error("indicator has " + std::to_string(pixels.size()) +
                             " pixels, expected " + std::to_string(mask.size()));
    }
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      if (pixels[i] != 0) mask.words_[i / kWordBits] |= Word{1} << (i % kWordBits);
    }
    return mask;
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return height_ * width_; }

  bool test(std::size_t index) const noexcept {
    return (words_[index / kWordBits] >> (index % kWordBits)) & 1U;
  }
  bool at(std::size_t row, std::size_t col) const noexcept {
    return test(row * width_ + col);
  }

  void set(std::size_t index, bool value) noexcept {
    const Word bit = Word{1} << (index % kWordBits);
    if (value) {
      words_[index / kWordBits] |= bit;
    } else {
      words_[index / kWordBits] &= ~bit;
    }
  }
  void set(std::size_t row, std::size_t col, bool value) noexcept {
    set(row * width_ + col, value);
  }

  std::size_t count() const noexcept {
    std::size_t total = 0;
    for (Word w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }
  bool empty() const noexcept {
    return std::all_of(words_.begin(), words_.end(), [](Word w) { return w == 0; });
  }

  std::span<const Word> words() const noexcept { return words_; }

  // Applies `op(word_a, word_b)` word by word and re-clears the padding.
  template <typename Op>
  static BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
    a.require_same_shape(b);
    BinaryMask out(a.height_, a.width_);
    for (std::size_t i = 0; i < out.words_.size(); ++i) {
      out.words_[i] = op(a.words_[i], b.words_[i]);
    }
    out.clear_padding();
    return out;
  }

  // Writable view for kernels that fill whole words; callers must not set
  // padding bits, or must call clear_padding() afterwards.
  std::span<Word> mutable_words() noexcept { return words_; }
  void clear_padding() noexcept {
    const std::size_t tail = size() % kWordBits;
    if (tail != 0) words_.back() &= (Word{1} << tail) - 1;
  }

  std::vector<std::uint8_t> to_indicator() const {
    std::vector<std::uint8_t> pixels(size());
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = test(i) ? 1 : 0;
    return pixels;
  }

  bool same_shape(const BinaryMask& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }
  void require_same_shape(const BinaryMask& other) const {
    if (!same_shape(other)) {
      throw validation_error("mask dimension mismatch: " + shape() + " vs " +
                             other.shape());
    }
  }

  std::string shape() const { return shape_string(height_, width_); }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) = default;

 private:
  static std::string shape_string(std::size_t h, std::size_t w) {
    return std::to_string(h) + "x" + std::to_string(w);
  }

  std::size_t height_;
  std::size_t width_;
  std::vector<Word> words_;
};

inline BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  return BinaryMask::combine(a, b, [](auto x, auto y) { return x & y; });
}
inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  return BinaryMask::combine(a, b, [](auto x, auto y) { return x | y; });
}
inline BinaryMask mask_xor(const BinaryMask& a, const BinaryMask& b) {
  return BinaryMask::combine(a, b, [](auto x, auto y) { return x ^ y; });
}
inline BinaryMask complement(const BinaryMask& m) {
  return BinaryMask::combine(m, m, [](auto x, auto) { return ~x; });
}

inline std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  a.require_same_shape(b);
  std::size_t total = 0;
  auto wa = a.words(), wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    total += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
  }
  return total;
}

inline std::size_t union_count(const BinaryMask& a, const BinaryMask& b) {
  a.require_same_shape(b);
  std::size_t total = 0;
  auto wa = a.words(), wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    total += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
  }
  return total;
}

inline std::size_t hamming_distance(const BinaryMask& a, const BinaryMask& b) {
  a.require_same_shape(b);
  std::size_t total = 0;
  auto wa = a.words(), wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    total += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  }
  return total;
}

// Intersection over union. Two empty masks agree perfectly (1.0).
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  const std::size_t uni = union_count(a, b);
  if (uni == 0) return 1.0;
  return static_cast<double>(intersection_count(a, b)) / static_cast<double>(uni);
}

// Per-pixel number of masks marking the pixel foreground, row-major.
inline std::vector<std::uint32_t> vote_count_stack(std::span<const BinaryMask> masks) {
  if (masks.empty()) throw validation_error("vote_count_stack: empty mask list");
  const BinaryMask& first = masks.front();
  std::vector<std::uint32_t> counts(first.size(), 0);
  for (const BinaryMask& m : masks) {
    first.require_same_shape(m);
    auto words = m.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
      BinaryMask::Word bits = words[w];
      while (bits != 0) {
        const int b = std::countr_zero(bits);
        ++counts[w * BinaryMask::kWordBits + static_cast<std::size_t>(b)];
        bits &= bits - 1;
      }
    }
  }
  return counts;
}

// Shifts the mask by (dy, dx); pixels moved outside the frame are dropped.
inline BinaryMask translate(const BinaryMask& m, std::ptrdiff_t dy, std::ptrdiff_t dx) {
  BinaryMask out(m.height(), m.width());
  const auto h = static_cast<std::ptrdiff_t>(m.height());
  const auto w = static_cast<std::ptrdiff_t>(m.width());
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      if (!m.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) continue;
      const auto nr = r + dy, nc = c + dx;
      if (nr >= 0 && nr < h && nc >= 0 && nc < w) {
        out.set(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc), true);
      }
    }
  }
  return out;
}

// One step of 4-connected erosion. Pixels outside the frame count as
// background, so foreground touching the border is eroded too.
inline BinaryMask erode4(const BinaryMask& m) {
  BinaryMask out(m.height(), m.width());
  const std::size_t h = m.height(), w = m.width();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (!m.at(r, c)) continue;
      const bool keep = r > 0 && r + 1 < h && c > 0 && c + 1 < w &&
                        m.at(r - 1, c) && m.at(r + 1, c) && m.at(r, c - 1) &&
                        m.at(r, c + 1);
      if (keep) out.set(r, c, true);
    }
  }
  return out;
}

// Column-major run lengths, alternating background/foreground and always
// starting with a (possibly empty) background run.
struct RleMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> runs;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask rle_encode(const BinaryMask& m) {
  RleMask rle{m.height(), m.width(), {}};
  bool current = false;
  std::uint32_t run = 0;
  for (std::size_t c = 0; c < m.width(); ++c) {
    for (std::size_t r = 0; r < m.height(); ++r) {
      const bool v = m.at(r, c);
      if (v != current) {
        rle.runs.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.runs.push_back(run);
  return rle;
}

inline BinaryMask rle_decode(const RleMask& rle) {
  if (rle.height == 0 || rle.width == 0) {
    throw validation_error("rle: dimensions must be positive");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < rle.runs.size(); ++i) {
    if (rle.runs[i] == 0 && i != 0) {
      throw validation_error("rle: zero-length run at position " + std::to_string(i));
    }
    total += rle.runs[i];
  }
  const std::size_t expected = rle.height * rle.width;
  if (total != expected) {
    throw validation_error("rle: runs sum to " + std::to_string(total) + ", expected " +
                           std::to_string(expected));
  }
  BinaryMask m(rle.height, rle.width);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < rle.runs.size(); ++i) {
    const bool fg = (i % 2) == 1;
    for (std::uint32_t k = 0; k < rle.runs[i]; ++k, ++pos) {
      if (fg) m.set(pos % rle.height, pos / rle.height, true);
    }
  }
  return m;
}

// Text form: "height width r0 r1 ...".
inline std::string rle_to_string(const RleMask& rle) {
  std::ostringstream out;
  out << rle.height << ' ' << rle.width;
  for (auto r : rle.runs) out << ' ' << r;
  return out.str();
}

inline RleMask rle_from_string(const std::string& text) {
  std::istringstream in(text);
  RleMask rle;
  if (!(in >> rle.height >> rle.width)) {
    throw validation_error("rle text: missing height/width in '" + text + "'");
  }
  long long run = 0;
  while (in >> run) {
    if (run < 0 || run > UINT32_MAX) {
      throw validation_error("rle text: run out of range: " + std::to_string(run));
    }
    rle.runs.push_back(static_cast<std::uint32_t>(run));
  }
  if (!in.eof()) throw validation_error("rle text: malformed token in '" + text + "'");
  if (rle.runs.empty()) throw validation_error("rle text: no runs in '" + text + "'");
  return rle;
}

// Per-frame masks for one (video, expression) pair. Frame names are unique
// and ascending; every mask has the same shape.
class MaskSequence {
 public:
  using Frame = std::pair<std::string, BinaryMask>;

  MaskSequence() = default;
  explicit MaskSequence(std::vector<Frame> frames) : frames_(std::move(frames)) {
    for (std::size_t i = 1; i < frames_.size(); ++i) {
      if (!(frames_[i - 1].first < frames_[i].first)) {
        throw validation_error("mask sequence: frame names not strictly ascending at '" +
                               frames_[i].first + "'");
      }
      frames_[0].second.require_same_shape(frames_[i].second);
    }
  }

  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }
  const Frame& operator[](std::size_t i) const { return frames_[i]; }
  const std::string& name(std::size_t i) const { return frames_[i].first; }
  const BinaryMask& mask(std::size_t i) const { return frames_[i].second; }
  auto begin() const noexcept { return frames_.begin(); }
  auto end() const noexcept { return frames_.end(); }

  std::vector<std::string> frame_names() const {
    std::vector<std::string> names;
    names.reserve(frames_.size());
    for (const auto& f : frames_) names.push_back(f.first);
    return names;
  }

  friend bool operator==(const MaskSequence&, const MaskSequence&) = default;

 private:
  std::vector<Frame> frames_;
};

}  // namespace rvos

#endif  // RVOS_MASK_HPP_
