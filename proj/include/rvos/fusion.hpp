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

#ifndef RVOS_FUSION_HPP_
#define RVOS_FUSION_HPP_

// Pixel-level voting over K expert masks: a pixel is foreground iff
// 2 * votes > K. Even-K ties fall to background.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rvos/dataset.hpp"
#include "rvos/error.hpp"
#include "rvos/mask.hpp"
#include "rvos/parallel.hpp"

namespace rvos {

namespace fusion_detail {

// Bit-sliced counter: plane b holds bit b of each pixel's vote count, 64
// pixels per word. Adding a mask is a ripple-carry add; the threshold test
// is a bitwise magnitude comparison from the top plane down.
inline BinaryMask fuse_words(std::span<const BinaryMask* const> masks) {
  if (masks.empty()) throw validation_error("fuse_frame: empty mask list");
  const BinaryMask& first = *masks.front();
  for (const BinaryMask* m : masks) first.require_same_shape(*m);

  using Word = BinaryMask::Word;
  const std::size_t k = masks.size();
  const std::size_t threshold = k / 2 + 1;
  const auto planes_needed = static_cast<std::size_t>(std::bit_width(k));
  std::vector<Word> planes(planes_needed);

  BinaryMask out(first.height(), first.width());
  auto out_words = out.mutable_words();
  for (std::size_t w = 0; w < out_words.size(); ++w) {
    std::fill(planes.begin(), planes.end(), Word{0});
    for (const BinaryMask* m : masks) {
      Word carry = m->words()[w];
      for (std::size_t b = 0; b < planes_needed && carry != 0; ++b) {
        const Word next = planes[b] & carry;
        planes[b] ^= carry;
        carry = next;
      }
    }
    Word greater = 0;
    Word equal = ~Word{0};
    for (std::size_t b = planes_needed; b-- > 0;) {
      const Word t = ((threshold >> b) & 1U) ? ~Word{0} : Word{0};
      greater |= equal & planes[b] & ~t;
      equal &= ~(planes[b] ^ t);
    }
    out_words[w] = greater | equal;
  }
  out.clear_padding();
  return out;
}

}  // namespace fusion_detail

inline BinaryMask fuse_frame(std::span<const BinaryMask> masks) {
  std::vector<const BinaryMask*> ptrs;
  ptrs.reserve(masks.size());
  for (const auto& m : masks) ptrs.push_back(&m);
  return fusion_detail::fuse_words(ptrs);
}

inline BinaryMask fuse_frame(std::span<const BinaryMask* const> masks) {
  return fusion_detail::fuse_words(masks);
}

// One expert's predictions for a whole split.
struct PredictionSet {
  std::string model_name;
  MaskTree sequences;
};

inline MaskSequence fuse_sequences(std::span<const MaskSequence* const> sequences) {
  if (sequences.empty()) throw validation_error("fuse: no sequences");
  const MaskSequence& first = *sequences.front();
  for (const MaskSequence* s : sequences) {
    if (s->size() != first.size()) {
      throw validation_error("fuse: sequences differ in length (" + std::to_string(first.size()) +
                             " vs " + std::to_string(s->size()) + ")");
    }
    for (std::size_t t = 0; t < first.size(); ++t) {
      if (s->name(t) != first.name(t)) {
        throw validation_error("fuse: frame " + std::to_string(t) + " is '" + first.name(t) +
                               "' in one set and '" + s->name(t) + "' in another");
      }
    }
  }
  std::vector<MaskSequence::Frame> frames;
  frames.reserve(first.size());
  std::vector<const BinaryMask*> column(sequences.size());
  for (std::size_t t = 0; t < first.size(); ++t) {
    for (std::size_t k = 0; k < sequences.size(); ++k) column[k] = &sequences[k]->mask(t);
    frames.emplace_back(first.name(t), fuse_frame(std::span<const BinaryMask* const>(column)));
  }
  return MaskSequence(std::move(frames));
}

// Fuses K prediction sets key by key. Every set must cover exactly the same
// (video, expression) keys.
inline PredictionSet fuse_sets(std::span<const PredictionSet> sets,
                               std::size_t workers = default_workers()) {
  if (sets.empty()) throw validation_error("fuse_sets: no prediction sets");
  const auto& reference = sets.front();
  for (const auto& set : sets) {
    std::vector<std::string> diff;
    for (const auto& [key, seq] : reference.sequences) {
      if (!set.sequences.contains(key)) {
        diff.push_back(key_string(key) + " (missing from " + set.model_name + ")");
      }
    }
    for (const auto& [key, seq] : set.sequences) {
      if (!reference.sequences.contains(key)) {
        diff.push_back(key_string(key) + " (missing from " + reference.model_name + ")");
      }
    }
    if (!diff.empty()) {
      std::string message = "fuse_sets: key sets differ:";
      for (const auto& d : diff) message += " " + d + ";";
      throw validation_error(message);
    }
  }

  std::vector<const SequenceKey*> keys;
  for (const auto& [key, seq] : reference.sequences) keys.push_back(&key);
  std::vector<MaskSequence> fused(keys.size());
  parallel_for(keys.size(), workers, [&](std::size_t i) {
    std::vector<const MaskSequence*> members;
    for (const auto& set : sets) members.push_back(&set.sequences.at(*keys[i]));
    try {
      fused[i] = fuse_sequences(members);
    } catch (const Error& e) {
      throw e.with_context(key_string(*keys[i]));
    }
  });

  PredictionSet out;
  out.model_name = "fuse(";
  for (std::size_t k = 0; k < sets.size(); ++k) {
    out.model_name += (k ? "," : "") + sets[k].model_name;
  }
  out.model_name += ")";
  for (std::size_t i = 0; i < keys.size(); ++i) out.sequences.emplace(*keys[i], std::move(fused[i]));
  return out;
}

}  // namespace rvos

#endif  // RVOS_FUSION_HPP_
