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

#ifndef RVOS_PIPELINE_HPP_
#define RVOS_PIPELINE_HPP_

// Key-frame inference pipeline: sample key frames, segment them with a
// language-conditioned backend, then fill every other frame by propagating
// from memory in ascending temporal order, re-anchoring memory whenever a key
// frame is passed.

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <deque>
#include <filesystem>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rvos/dataset.hpp"
#include "rvos/error.hpp"
#include "rvos/mask.hpp"
#include "rvos/png_io.hpp"
#include "rvos/sampler.hpp"

namespace rvos {

struct FrameRef {
  std::string video_id;
  std::size_t index = 0;
  std::string name;
};

// Stands in for the language-model key-frame stage.
class SegmenterOracle {
 public:
  virtual ~SegmenterOracle() = default;
  // One mask per key frame, in the order given.
  virtual std::vector<BinaryMask> segment(std::span<const FrameRef> key_frames,
                                          std::string_view expression) const = 0;
  // True if one instance may serve several (video, expression) runs at once.
  virtual bool shareable() const { return false; }
};

// Propagation memory. The pipeline never looks inside; the reference
// propagators keep every key-frame anchor, the last anchor passed, and a
// bounded window of recently produced masks.
struct MemoryState {
  std::map<std::size_t, BinaryMask> anchors;
  std::optional<std::size_t> last_anchor;
  std::deque<std::pair<std::size_t, BinaryMask>> recent;
  std::size_t window = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["anchors"] = nlohmann::json::array();
    for (const auto& [idx, mask] : anchors) {
      j["anchors"].push_back({{"index", idx}, {"foreground", mask.count()}});
    }
    j["last_anchor"] = last_anchor ? nlohmann::json(*last_anchor) : nlohmann::json(nullptr);
    j["recent"] = nlohmann::json::array();
    for (const auto& [idx, mask] : recent) {
      j["recent"].push_back({{"index", idx}, {"foreground", mask.count()}});
    }
    j["window"] = window;
    return j;
  }
};

// Stands in for the memory-attention propagation stage. step() must be a
// deterministic function of (memory, frame) and the backend's own seed.
class PropagatorOracle {
 public:
  virtual ~PropagatorOracle() = default;
  virtual MemoryState init(const std::map<std::size_t, BinaryMask>& key_masks) const = 0;
  // Called when the pipeline reaches a key frame.
  virtual MemoryState anchor(MemoryState memory, const FrameRef& frame,
                             const BinaryMask& mask) const = 0;
  virtual std::pair<BinaryMask, MemoryState> step(MemoryState memory,
                                                  const FrameRef& frame) const = 0;
  virtual bool shareable() const { return false; }
};

// ---------------------------------------------------------------------------
// Seeding

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Seed for one (video, expression) unit: splitmix64(seed + fnv1a64("video/expression")).
inline std::uint64_t unit_seed(std::uint64_t seed, std::string_view video_id,
                               std::string_view expression_id) {
  std::string key;
  key.reserve(video_id.size() + expression_id.size() + 1);
  key.append(video_id).append("/").append(expression_id);
  return splitmix64(seed + fnv1a64(key));
}

inline std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame_index) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(frame_index)));
}

// Flips each pixel independently with probability `rate`. Uses the top 53
// bits of mt19937_64 directly so results match across standard libraries.
inline BinaryMask flip_pixels(const BinaryMask& mask, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw validation_error("flip rate must be in [0, 1], got " + std::to_string(rate));
  }
  BinaryMask out = mask;
  if (rate == 0.0) return out;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u < rate) out.set(i, !out.test(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference segmenters

namespace pipeline_detail {

inline const BinaryMask& gt_frame(const MaskSequence& gt, const FrameRef& frame) {
  if (frame.index >= gt.size()) {
    throw validation_error("frame index " + std::to_string(frame.index) +
                           " outside ground truth of " + std::to_string(gt.size()) + " frames");
  }
  if (!frame.name.empty() && gt.name(frame.index) != frame.name) {
    throw validation_error("frame " + std::to_string(frame.index) + " is '" + frame.name +
                           "' but ground truth has '" + gt.name(frame.index) + "'");
  }
  return gt.mask(frame.index);
}

class GtNoiseSegmenter final : public SegmenterOracle {
 public:
  GtNoiseSegmenter(MaskSequence gt, double flip_rate, std::uint64_t seed)
      : gt_(std::move(gt)), flip_rate_(flip_rate), seed_(seed) {
    if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) {
      throw validation_error("gt-noise flip rate must be in [0, 1], got " +
                             std::to_string(flip_rate));
    }
  }

  std::vector<BinaryMask> segment(std::span<const FrameRef> key_frames,
                                  std::string_view) const override {
    std::vector<BinaryMask> out;
    out.reserve(key_frames.size());
    for (const auto& frame : key_frames) {
      out.push_back(flip_pixels(gt_frame(gt_, frame), flip_rate_, frame_seed(seed_, frame.index)));
    }
    return out;
  }

 private:
  MaskSequence gt_;
  double flip_rate_;
  std::uint64_t seed_;
};

class PrecomputedSegmenter final : public SegmenterOracle {
 public:
  PrecomputedSegmenter(std::filesystem::path root, std::string video_id, std::string expression_id)
      : root_(std::move(root)), video_id_(std::move(video_id)), expression_id_(std::move(expression_id)) {}

  std::vector<BinaryMask> segment(std::span<const FrameRef> key_frames,
                                  std::string_view) const override {
    std::vector<BinaryMask> out;
    out.reserve(key_frames.size());
    for (const auto& frame : key_frames) {
      const auto path = mask_path(root_, video_id_, expression_id_, frame.name);
      if (!std::filesystem::is_regular_file(path)) {
        throw validation_error("precomputed mask missing: " + path.string());
      }
      out.push_back(read_mask_png(path));
    }
    return out;
  }

  bool shareable() const override { return true; }

 private:
  std::filesystem::path root_;
  std::string video_id_;
  std::string expression_id_;
};

}  // namespace pipeline_detail

// Returns ground truth with every pixel flipped independently at
// `flip_rate`. The draw for frame i depends only on (seed, i).
inline std::unique_ptr<SegmenterOracle> make_gt_noise_segmenter(MaskSequence gt, double flip_rate,
                                                                std::uint64_t seed) {
  return std::make_unique<pipeline_detail::GtNoiseSegmenter>(std::move(gt), flip_rate, seed);
}

// Serves stored masks from a prediction tree.
inline std::unique_ptr<SegmenterOracle> make_precomputed_segmenter(
    const std::filesystem::path& prediction_root, const std::string& video_id,
    const std::string& expression_id) {
  return std::make_unique<pipeline_detail::PrecomputedSegmenter>(prediction_root, video_id,
                                                                 expression_id);
}

// ---------------------------------------------------------------------------
// Reference propagators

namespace pipeline_detail {

class WindowedPropagator : public PropagatorOracle {
 public:
  explicit WindowedPropagator(std::size_t window) : window_(window) {}

  MemoryState init(const std::map<std::size_t, BinaryMask>& key_masks) const override {
    MemoryState m;
    m.anchors = key_masks;
    m.window = window_;
    return m;
  }

  MemoryState anchor(MemoryState memory, const FrameRef& frame,
                     const BinaryMask& mask) const override {
    memory.anchors.insert_or_assign(frame.index, mask);
    memory.last_anchor = frame.index;
    remember(memory, frame.index, mask);
    return memory;
  }

 protected:
  static void remember(MemoryState& memory, std::size_t index, const BinaryMask& mask) {
    if (memory.window == 0) return;
    memory.recent.emplace_back(index, mask);
    while (memory.recent.size() > memory.window) memory.recent.pop_front();
  }

  // Nearest anchor by temporal distance; the earlier one wins a tie.
  static const std::pair<const std::size_t, BinaryMask>& nearest_anchor(const MemoryState& memory,
                                                                       std::size_t index) {
    if (memory.anchors.empty()) throw runtime_error("propagator memory holds no key frames");
    auto after = memory.anchors.lower_bound(index);
    if (after == memory.anchors.begin()) return *after;
    auto before = std::prev(after);
    if (after == memory.anchors.end()) return *before;
    return (index - before->first) <= (after->first - index) ? *before : *after;
  }

 private:
  std::size_t window_;
};

class NearestKeyPropagator final : public WindowedPropagator {
 public:
  using WindowedPropagator::WindowedPropagator;

  std::pair<BinaryMask, MemoryState> step(MemoryState memory, const FrameRef& frame) const override {
    BinaryMask out = nearest_anchor(memory, frame.index).second;
    remember(memory, frame.index, out);
    return {std::move(out), std::move(memory)};
  }

  bool shareable() const override { return true; }
};

class DecayNoisePropagator final : public WindowedPropagator {
 public:
  DecayNoisePropagator(MaskSequence gt, double base_rate, double growth, std::uint64_t seed,
                       std::size_t window)
      : WindowedPropagator(window), gt_(std::move(gt)), base_rate_(base_rate), growth_(growth),
        seed_(seed) {
    if (!(base_rate >= 0.0 && base_rate <= 1.0) || !(growth >= 0.0)) {
      throw validation_error("decay-noise needs base rate in [0, 1] and growth >= 0");
    }
  }

  std::pair<BinaryMask, MemoryState> step(MemoryState memory, const FrameRef& frame) const override {
    std::size_t distance = 0;
    if (memory.last_anchor && *memory.last_anchor <= frame.index) {
      distance = frame.index - *memory.last_anchor;
    } else {
      const auto& nearest = nearest_anchor(memory, frame.index);
      distance = nearest.first > frame.index ? nearest.first - frame.index
                                             : frame.index - nearest.first;
    }
    const double rate = std::min(1.0, base_rate_ + growth_ * static_cast<double>(distance));
    BinaryMask out = flip_pixels(gt_frame(gt_, frame), rate, frame_seed(seed_, frame.index));
    remember(memory, frame.index, out);
    return {std::move(out), std::move(memory)};
  }

 private:
  MaskSequence gt_;
  double base_rate_;
  double growth_;
  std::uint64_t seed_;
};

}  // namespace pipeline_detail

// Copies the temporally nearest key-frame mask (earlier key on a tie).
inline std::unique_ptr<PropagatorOracle> make_nearest_key_propagator(std::size_t window = 7) {
  return std::make_unique<pipeline_detail::NearestKeyPropagator>(window);
}

// Ground truth flipped at min(1, base_rate + growth * d), d being the
// distance to the last key frame passed.
inline std::unique_ptr<PropagatorOracle> make_decay_noise_propagator(MaskSequence gt, double base_rate,
                                                                    double growth, std::uint64_t seed,
                                                                    std::size_t window = 7) {
  return std::make_unique<pipeline_detail::DecayNoisePropagator>(std::move(gt), base_rate, growth,
                                                                 seed, window);
}

// ---------------------------------------------------------------------------
// Backend specs
//
//   segmenter:  gt | gt-noise:<rate>[:seed=<n>] | precomputed:<root>
//   propagator: nearest-key[:window=<w>]
//             | decay-noise:<base>:<growth>[:seed=<n>][:window=<w>]

struct SegmenterSpec {
  enum class Kind { gt_noise, precomputed } kind = Kind::gt_noise;
  double flip_rate = 0.0;
  std::optional<std::uint64_t> seed;
  std::filesystem::path root;
  std::string text;
};

struct PropagatorSpec {
  enum class Kind { nearest_key, decay_noise } kind = Kind::nearest_key;
  double base_rate = 0.0;
  double growth = 0.0;
  std::optional<std::uint64_t> seed;
  std::size_t window = 7;
  std::string text;
};

namespace pipeline_detail {

inline std::vector<std::string> split_spec(std::string_view text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.emplace_back(text.substr(start, colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  return parts;
}

inline double parse_number(const std::string& token, std::string_view spec) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used == token.size()) return v;
  } catch (const std::exception&) {
  }
  throw validation_error("backend spec '" + std::string(spec) + "': bad number '" + token + "'");
}

inline std::uint64_t parse_unsigned(const std::string& token, std::string_view spec) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(token, &used);
    if (used == token.size() && !token.empty() && token[0] != '-') return v;
  } catch (const std::exception&) {
  }
  throw validation_error("backend spec '" + std::string(spec) + "': bad integer '" + token + "'");
}

// Consumes trailing key=value options into `out`; returns positional parts.
inline std::vector<std::string> take_options(std::vector<std::string> parts,
                                             std::map<std::string, std::string>& out,
                                             std::string_view spec) {
  std::vector<std::string> positional;
  for (auto& p : parts) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) {
      if (!out.empty()) {
        throw validation_error("backend spec '" + std::string(spec) +
                               "': positional value after options");
      }
      positional.push_back(std::move(p));
    } else {
      out[p.substr(0, eq)] = p.substr(eq + 1);
    }
  }
  return positional;
}

}  // namespace pipeline_detail

inline SegmenterSpec parse_segmenter_spec(std::string_view text) {
  using namespace pipeline_detail;
  SegmenterSpec spec;
  spec.text = std::string(text);
  const auto parts = split_spec(text);
  if (parts[0] == "precomputed") {
    if (parts.size() < 2 || parts[1].empty()) {
      throw validation_error("segmenter spec '" + spec.text + "': precomputed needs a root path");
    }
    spec.kind = SegmenterSpec::Kind::precomputed;
    // Paths may contain ':'.
    spec.root = std::string(text.substr(std::string_view("precomputed:").size()));
    return spec;
  }
  std::map<std::string, std::string> options;
  const auto positional = take_options(parts, options, text);
  if (positional[0] == "gt" && positional.size() == 1) {
    spec.flip_rate = 0.0;
  } else if (positional[0] == "gt-noise" && positional.size() == 2) {
    spec.flip_rate = parse_number(positional[1], text);
    if (!(spec.flip_rate >= 0.0 && spec.flip_rate <= 1.0)) {
      throw validation_error("segmenter spec '" + spec.text + "': flip rate must be in [0, 1]");
    }
  } else {
    throw validation_error("unknown segmenter spec '" + spec.text +
                           "' (expected gt, gt-noise:<rate>[:seed=<n>], precomputed:<root>)");
  }
  for (const auto& [key, value] : options) {
    if (key != "seed") throw validation_error("segmenter spec '" + spec.text + "': unknown option '" + key + "'");
    spec.seed = parse_unsigned(value, text);
  }
  return spec;
}

inline PropagatorSpec parse_propagator_spec(std::string_view text) {
  using namespace pipeline_detail;
  PropagatorSpec spec;
  spec.text = std::string(text);
  std::map<std::string, std::string> options;
  const auto positional = take_options(split_spec(text), options, text);
  if (positional[0] == "nearest-key" && positional.size() == 1) {
    spec.kind = PropagatorSpec::Kind::nearest_key;
  } else if (positional[0] == "decay-noise" && positional.size() == 3) {
    spec.kind = PropagatorSpec::Kind::decay_noise;
    spec.base_rate = parse_number(positional[1], text);
    spec.growth = parse_number(positional[2], text);
    if (!(spec.base_rate >= 0.0 && spec.base_rate <= 1.0) || !(spec.growth >= 0.0)) {
      throw validation_error("propagator spec '" + spec.text +
                             "': base rate must be in [0, 1] and growth >= 0");
    }
  } else {
    throw validation_error("unknown propagator spec '" + spec.text +
                           "' (expected nearest-key or decay-noise:<base>:<growth>)");
  }
  for (const auto& [key, value] : options) {
    if (key == "seed" && spec.kind == PropagatorSpec::Kind::decay_noise) {
      spec.seed = parse_unsigned(value, text);
    } else if (key == "window") {
      spec.window = static_cast<std::size_t>(parse_unsigned(value, text));
    } else {
      throw validation_error("propagator spec '" + spec.text + "': unknown option '" + key + "'");
    }
  }
  return spec;
}

inline bool needs_ground_truth(const SegmenterSpec& s) {
  return s.kind == SegmenterSpec::Kind::gt_noise;
}
inline bool needs_ground_truth(const PropagatorSpec& p) {
  return p.kind == PropagatorSpec::Kind::decay_noise;
}

// Builds the backend for one (video, expression) unit. A spec without an
// explicit seed falls back to `default_seed`; either way the unit's seed is
// unit_seed(seed, video_id, expression_id). `gt` may be null when the spec
// does not read ground truth.
inline std::unique_ptr<SegmenterOracle> make_segmenter(const SegmenterSpec& spec,
                                                       const SequenceKey& key,
                                                       const MaskSequence* gt,
                                                       std::uint64_t default_seed) {
  if (spec.kind == SegmenterSpec::Kind::precomputed) {
    return make_precomputed_segmenter(spec.root, key.first, key.second);
  }
  if (gt == nullptr) throw validation_error("segmenter '" + spec.text + "' needs ground truth");
  const auto seed = unit_seed(spec.seed.value_or(default_seed), key.first, key.second);
  return make_gt_noise_segmenter(*gt, spec.flip_rate, seed);
}

inline std::unique_ptr<PropagatorOracle> make_propagator(const PropagatorSpec& spec,
                                                         const SequenceKey& key,
                                                         const MaskSequence* gt,
                                                         std::uint64_t default_seed) {
  if (spec.kind == PropagatorSpec::Kind::nearest_key) return make_nearest_key_propagator(spec.window);
  if (gt == nullptr) throw validation_error("propagator '" + spec.text + "' needs ground truth");
  // Offset keeps propagator draws independent of a segmenter sharing the seed.
  const auto seed = unit_seed(spec.seed.value_or(default_seed) + 0x5851F42D4C957F2DULL, key.first,
                              key.second);
  return make_decay_noise_propagator(*gt, spec.base_rate, spec.growth, seed, spec.window);
}

// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::size_t n_keyframes = 5;
  SamplingStrategy strategy = SamplingStrategy::uniform;
};

inline std::vector<FrameRef> frame_refs(const VideoRecord& video, std::span<const std::size_t> indices) {
  std::vector<FrameRef> refs;
  refs.reserve(indices.size());
  for (auto i : indices) refs.push_back({video.video_id, i, video.frame_names.at(i)});
  return refs;
}

inline MaskSequence run_pipeline(const VideoRecord& video, const ExpressionRecord& expression,
                                 const SegmenterOracle& segmenter,
                                 const PropagatorOracle& propagator, const PipelineConfig& config) {
  const std::size_t n = video.n_frames();
  const SamplingPlan plan = make_plan(config.strategy, n, config.n_keyframes);
  const auto key_refs = frame_refs(video, plan.indices);

  std::vector<BinaryMask> key_masks;
  try {
    key_masks = segmenter.segment(key_refs, expression.text);
  } catch (const Error& e) {
    throw e.with_context("video '" + video.video_id + "' expression '" + expression.expression_id +
                         "' key-frame segmentation");
  }
  if (key_masks.size() != key_refs.size()) {
    throw runtime_error("segmenter returned " + std::to_string(key_masks.size()) + " masks for " +
                        std::to_string(key_refs.size()) + " key frames");
  }
  for (std::size_t i = 1; i < key_masks.size(); ++i) {
    if (!key_masks[0].same_shape(key_masks[i])) {
      throw runtime_error("segmenter mask for frame " + std::to_string(key_refs[i].index) + " is " +
                          key_masks[i].shape() + ", expected " + key_masks[0].shape());
    }
  }

  std::map<std::size_t, BinaryMask> anchors;
  for (std::size_t i = 0; i < key_refs.size(); ++i) anchors.emplace(key_refs[i].index, key_masks[i]);

  MemoryState memory = propagator.init(anchors);
  std::vector<MaskSequence::Frame> frames;
  frames.reserve(n);
  std::size_t next_key = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const FrameRef ref{video.video_id, t, video.frame_names[t]};
    try {
      if (next_key < key_refs.size() && key_refs[next_key].index == t) {
        memory = propagator.anchor(std::move(memory), ref, key_masks[next_key]);
        frames.emplace_back(ref.name, key_masks[next_key]);
        ++next_key;
      } else {
        auto [mask, next] = propagator.step(std::move(memory), ref);
        memory = std::move(next);
        if (!mask.same_shape(key_masks[0])) {
          throw runtime_error("propagated mask is " + mask.shape() + ", expected " +
                              key_masks[0].shape());
        }
        frames.emplace_back(ref.name, std::move(mask));
      }
    } catch (const Error& e) {
      throw e.with_context("video '" + video.video_id + "' expression '" +
                           expression.expression_id + "' frame " + std::to_string(t) + " ('" +
                           ref.name + "')");
    }
  }
  return MaskSequence(std::move(frames));
}

}  // namespace rvos

#endif  // RVOS_PIPELINE_HPP_
