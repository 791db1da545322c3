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

#ifndef RVOS_SAMPLER_HPP_
#define RVOS_SAMPLER_HPP_

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rvos/error.hpp"

namespace rvos {

enum class SamplingStrategy { uniform, first_k };

inline std::string_view to_string(SamplingStrategy s) {
  return s == SamplingStrategy::uniform ? "uniform" : "first_k";
}

inline SamplingStrategy parse_strategy(std::string_view text) {
  if (text == "uniform") return SamplingStrategy::uniform;
  if (text == "first_k" || text == "first-k") return SamplingStrategy::first_k;
  throw validation_error("unknown sampling strategy '" + std::string(text) +
                         "' (expected uniform or first_k)");
}

// Which frames go to the key-frame segmenter. `indices` is strictly
// increasing, within [0, n_frames), and holds min(n_keyframes, n_frames)
// entries.
struct SamplingPlan {
  SamplingStrategy strategy = SamplingStrategy::uniform;
  std::size_t n_frames = 0;
  std::size_t n_keyframes = 0;
  std::vector<std::size_t> indices;

  friend bool operator==(const SamplingPlan&, const SamplingPlan&) = default;
};

namespace sampler_detail {

inline void require_positive(std::size_t n_frames, std::size_t n_keyframes) {
  if (n_frames == 0) throw validation_error("sampling: video must have at least one frame");
  if (n_keyframes == 0) throw validation_error("sampling: need at least one key frame");
}

}  // namespace sampler_detail

// Endpoint-inclusive even spacing: index_i = round(i * (N-1) / (M-1)),
// rounding halves away from zero. Integer arithmetic keeps the result
// identical on every platform.
inline SamplingPlan uniform_indices(std::size_t n_frames, std::size_t n_keyframes) {
  sampler_detail::require_positive(n_frames, n_keyframes);
  SamplingPlan plan{SamplingStrategy::uniform, n_frames, n_keyframes, {}};
  if (n_keyframes >= n_frames) {
    for (std::size_t i = 0; i < n_frames; ++i) plan.indices.push_back(i);
    return plan;
  }
  if (n_keyframes == 1) {
    plan.indices.push_back(0);
    return plan;
  }
  const std::size_t span = n_frames - 1;
  const std::size_t steps = n_keyframes - 1;
  for (std::size_t i = 0; i < n_keyframes; ++i) {
    const std::size_t idx = (2 * i * span + steps) / (2 * steps);
    if (plan.indices.empty() || plan.indices.back() != idx) plan.indices.push_back(idx);
  }
  return plan;
}

inline SamplingPlan first_k_indices(std::size_t n_frames, std::size_t k) {
  sampler_detail::require_positive(n_frames, k);
  SamplingPlan plan{SamplingStrategy::first_k, n_frames, k, {}};
  for (std::size_t i = 0; i < std::min(k, n_frames); ++i) plan.indices.push_back(i);
  return plan;
}

inline SamplingPlan make_plan(SamplingStrategy strategy, std::size_t n_frames,
                              std::size_t n_keyframes) {
  return strategy == SamplingStrategy::uniform ? uniform_indices(n_frames, n_keyframes)
                                               : first_k_indices(n_frames, n_keyframes);
}

// Largest distance between consecutive key frames, counting the stretch
// from the last key frame to the final frame.
inline std::size_t max_gap(const SamplingPlan& plan) {
  std::size_t gap = 0;
  for (std::size_t i = 1; i < plan.indices.size(); ++i) {
    gap = std::max(gap, plan.indices[i] - plan.indices[i - 1]);
  }
  if (!plan.indices.empty()) gap = std::max(gap, plan.n_frames - 1 - plan.indices.back());
  return gap;
}

}  // namespace rvos

#endif  // RVOS_SAMPLER_HPP_
