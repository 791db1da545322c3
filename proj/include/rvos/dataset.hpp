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

#ifndef RVOS_DATASET_HPP_
#define RVOS_DATASET_HPP_

// MeViS-style benchmark layout:
//
//   meta_expressions.json
//     {"videos": {"<video_id>": {"frames": ["00000", ...],
//                                "expressions": {"<expression_id>":
//                                    {"exp": "...", "obj_id": [0, 1]}}}}}
//
//   <root>/<video_id>/<expression_id>/<frame_name>.png

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rvos/error.hpp"
#include "rvos/mask.hpp"
#include "rvos/parallel.hpp"
#include "rvos/png_io.hpp"

namespace rvos {

struct ExpressionRecord {
  std::string expression_id;
  std::string text;
  std::vector<int> object_ids;

  friend bool operator==(const ExpressionRecord&, const ExpressionRecord&) = default;
};

struct VideoRecord {
  std::string video_id;
  std::vector<std::string> frame_names;
  std::vector<ExpressionRecord> expressions;  // ascending expression_id

  std::size_t n_frames() const noexcept { return frame_names.size(); }

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct DatasetIndex {
  std::string split_name;
  std::map<std::string, VideoRecord> videos;

  friend bool operator==(const DatasetIndex&, const DatasetIndex&) = default;
};

struct DatasetStats {
  std::size_t videos = 0;
  std::size_t expressions = 0;
  std::size_t frames = 0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

// (video_id, expression_id)
using SequenceKey = std::pair<std::string, std::string>;
using MaskTree = std::map<SequenceKey, MaskSequence>;

enum class MaskSource { ground_truth, prediction };

inline const char* to_string(MaskSource source) {
  return source == MaskSource::ground_truth ? "ground truth" : "prediction";
}

inline std::string key_string(const SequenceKey& key) {
  return key.first + "/" + key.second;
}

namespace dataset_detail {

// Frame names that end in digits must use the same digit width as every
// other name sharing their prefix; "9" vs "10" cannot be ordered safely.
inline void check_frame_padding(const std::string& video_id,
                                const std::vector<std::string>& names) {
  std::map<std::string, std::pair<std::size_t, std::string>> width_by_prefix;
  for (const auto& name : names) {
    std::size_t end = name.size();
    while (end > 0 && std::isdigit(static_cast<unsigned char>(name[end - 1]))) --end;
    const std::size_t digits = name.size() - end;
    if (digits == 0) continue;
    auto [it, inserted] = width_by_prefix.try_emplace(name.substr(0, end), digits, name);
    if (!inserted && it->second.first != digits) {
      throw validation_error("video '" + video_id + "': frame names '" + it->second.second +
                             "' and '" + name + "' are not zero-padded to the same width");
    }
  }
}

inline std::vector<int> parse_object_ids(const nlohmann::json& value, const std::string& where) {
  std::vector<int> ids;
  if (value.is_number_integer()) {
    ids.push_back(value.get<int>());
  } else if (value.is_array()) {
    for (const auto& v : value) {
      if (!v.is_number_integer()) throw validation_error(where + ": obj_id entries must be integers");
      ids.push_back(v.get<int>());
    }
  } else if (!value.is_null()) {
    throw validation_error(where + ": obj_id must be an integer or a list of integers");
  }
  return ids;
}

}  // namespace dataset_detail

// Parses an already-loaded metadata document.
inline DatasetIndex parse_index(const nlohmann::json& doc, std::string split_name) {
  using nlohmann::json;
  if (!doc.is_object() || !doc.contains("videos") || !doc["videos"].is_object()) {
    throw validation_error("metadata: missing top-level 'videos' object");
  }
  DatasetIndex index;
  index.split_name = doc.contains("split") && doc["split"].is_string()
                         ? doc["split"].get<std::string>()
                         : std::move(split_name);
  for (const auto& [video_id, video] : doc["videos"].items()) {
    const std::string where = "video '" + video_id + "'";
    if (!video.is_object()) throw validation_error(where + ": entry must be an object");
    if (!video.contains("frames") || !video["frames"].is_array()) {
      throw validation_error(where + ": missing 'frames' list");
    }
    if (!video.contains("expressions") || !video["expressions"].is_object()) {
      throw validation_error(where + ": missing 'expressions' object");
    }
    VideoRecord record;
    record.video_id = video_id;
    for (const auto& f : video["frames"]) {
      if (!f.is_string() || f.get<std::string>().empty()) {
        throw validation_error(where + ": frame names must be nonempty strings");
      }
      record.frame_names.push_back(f.get<std::string>());
    }
    if (record.frame_names.empty()) throw validation_error(where + ": no frames");
    dataset_detail::check_frame_padding(video_id, record.frame_names);
    std::sort(record.frame_names.begin(), record.frame_names.end());
    if (auto dup = std::adjacent_find(record.frame_names.begin(), record.frame_names.end());
        dup != record.frame_names.end()) {
      throw validation_error(where + ": duplicate frame '" + *dup + "'");
    }
    // json objects are key-sorted, so expressions come out ascending.
    for (const auto& [expression_id, expr] : video["expressions"].items()) {
      const std::string ewhere = where + " expression '" + expression_id + "'";
      if (!expr.is_object()) throw validation_error(ewhere + ": entry must be an object");
      if (!expr.contains("exp") || !expr["exp"].is_string()) {
        throw validation_error(ewhere + ": missing 'exp' text");
      }
      ExpressionRecord e;
      e.expression_id = expression_id;
      e.text = expr["exp"].get<std::string>();
      if (e.text.empty()) throw validation_error(ewhere + ": empty 'exp' text");
      if (expr.contains("obj_id")) e.object_ids = dataset_detail::parse_object_ids(expr["obj_id"], ewhere);
      record.expressions.push_back(std::move(e));
    }
    index.videos.emplace(video_id, std::move(record));
  }
  return index;
}

// Duplicate keys are rejected while parsing, before nlohmann would silently
// keep the last one.
inline nlohmann::json parse_json_strict(std::istream& in, const std::string& what) {
  using nlohmann::json;
  std::vector<std::set<std::string>> seen;
  std::vector<std::string> path;
  std::string duplicate;
  json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        seen.resize(static_cast<std::size_t>(depth) + 1);
        seen[static_cast<std::size_t>(depth)].clear();
        break;
      case json::parse_event_t::key: {
        auto& keys = seen[static_cast<std::size_t>(depth) - 1];
        const auto key = parsed.get<std::string>();
        if (!keys.insert(key).second && duplicate.empty()) duplicate = key;
        break;
      }
      default:
        break;
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(in, cb);
  } catch (const json::parse_error& e) {
    throw validation_error(what + ": JSON parse error: " + e.what());
  }
  if (!duplicate.empty()) throw validation_error(what + ": duplicate id '" + duplicate + "'");
  return doc;
}

inline DatasetIndex load_index(const std::filesystem::path& metadata_path) {
  std::ifstream in(metadata_path);
  if (!in) throw validation_error("cannot open metadata file " + metadata_path.string());
  const auto doc = parse_json_strict(in, metadata_path.string());
  const auto parent = metadata_path.parent_path().filename().string();
  return parse_index(doc, parent);
}

inline nlohmann::json index_to_json(const DatasetIndex& index) {
  nlohmann::json videos = nlohmann::json::object();
  for (const auto& [id, video] : index.videos) {
    nlohmann::json expressions = nlohmann::json::object();
    for (const auto& e : video.expressions) {
      expressions[e.expression_id] = {{"exp", e.text}, {"obj_id", e.object_ids}};
    }
    videos[id] = {{"frames", video.frame_names}, {"expressions", expressions}};
  }
  return {{"split", index.split_name}, {"videos", videos}};
}

inline void write_index(const DatasetIndex& index, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw runtime_error("cannot write " + path.string());
  out << index_to_json(index).dump(2) << '\n';
}

inline DatasetStats dataset_stats(const DatasetIndex& index) {
  DatasetStats stats;
  stats.videos = index.videos.size();
  for (const auto& [id, video] : index.videos) {
    stats.expressions += video.expressions.size();
    stats.frames += video.frame_names.size();
  }
  return stats;
}

// All (video_id, expression_id) pairs in deterministic order.
inline std::vector<SequenceKey> sequence_keys(const DatasetIndex& index) {
  std::vector<SequenceKey> keys;
  for (const auto& [id, video] : index.videos) {
    for (const auto& e : video.expressions) keys.emplace_back(id, e.expression_id);
  }
  return keys;
}

inline const ExpressionRecord& find_expression(const VideoRecord& video,
                                               const std::string& expression_id) {
  for (const auto& e : video.expressions) {
    if (e.expression_id == expression_id) return e;
  }
  throw validation_error("video '" + video.video_id + "' has no expression '" + expression_id + "'");
}

inline std::filesystem::path mask_path(const std::filesystem::path& root, const std::string& video_id,
                                       const std::string& expression_id, const std::string& frame) {
  return root / video_id / expression_id / (frame + ".png");
}

inline MaskSequence load_sequence(const std::filesystem::path& root, const VideoRecord& video,
                                  const std::string& expression_id, MaskSource source) {
  std::vector<MaskSequence::Frame> frames;
  frames.reserve(video.frame_names.size());
  for (const auto& name : video.frame_names) {
    const auto path = mask_path(root, video.video_id, expression_id, name);
    if (!std::filesystem::is_regular_file(path)) {
      throw validation_error(std::string(to_string(source)) + " mask missing for video '" +
                             video.video_id + "' expression '" + expression_id + "' frame '" +
                             name + "': " + path.string());
    }
    BinaryMask mask = read_mask_png(path);
    if (!frames.empty() && !frames.front().second.same_shape(mask)) {
      throw validation_error("dimension mismatch in " + path.string() + ": " + mask.shape() +
                             " vs " + frames.front().second.shape() + " for earlier frames");
    }
    frames.emplace_back(name, std::move(mask));
  }
  return MaskSequence(std::move(frames));
}

// Loads every expression's full sequence; throws on the first incomplete or
// inconsistent entry, never returning a partial tree. Dimensions must agree
// across all expressions of a video.
inline MaskTree load_mask_tree(const std::filesystem::path& root, const DatasetIndex& index,
                               MaskSource source, std::size_t workers = default_workers()) {
  if (!std::filesystem::is_directory(root)) {
    throw validation_error(std::string(to_string(source)) + " root is not a directory: " +
                           root.string());
  }
  const auto keys = sequence_keys(index);
  std::vector<MaskSequence> loaded(keys.size());
  parallel_for(keys.size(), workers, [&](std::size_t i) {
    loaded[i] = load_sequence(root, index.videos.at(keys[i].first), keys[i].second, source);
  });
  for (std::size_t i = 1; i < keys.size(); ++i) {
    if (keys[i - 1].first == keys[i].first &&
        !loaded[i - 1].mask(0).same_shape(loaded[i].mask(0))) {
      throw validation_error("dimension mismatch within video '" + keys[i].first + "': expression '" +
                             keys[i].second + "' is " + loaded[i].mask(0).shape() + ", expression '" +
                             keys[i - 1].second + "' is " + loaded[i - 1].mask(0).shape());
    }
  }
  MaskTree tree;
  for (std::size_t i = 0; i < keys.size(); ++i) tree.emplace(keys[i], std::move(loaded[i]));
  return tree;
}

inline void write_sequence(const std::filesystem::path& root, const std::string& video_id,
                           const std::string& expression_id, const MaskSequence& sequence) {
  for (const auto& [name, mask] : sequence) {
    write_mask_png(mask_path(root, video_id, expression_id, name), mask);
  }
}

inline void write_mask_tree(const std::filesystem::path& root, const MaskTree& tree,
                            std::size_t workers = default_workers()) {
  std::vector<const MaskTree::value_type*> entries;
  for (const auto& entry : tree) entries.push_back(&entry);
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    write_sequence(root, entries[i]->first.first, entries[i]->first.second, entries[i]->second);
  });
}

}  // namespace rvos

#endif  // RVOS_DATASET_HPP_
