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

#ifndef RVOS_RUN_HPP_
#define RVOS_RUN_HPP_

// Workflow stages shared by the command-line tool: simulate, fuse, evaluate,
// report, and the end-to-end run that chains them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rvos/dataset.hpp"
#include "rvos/error.hpp"
#include "rvos/fusion.hpp"
#include "rvos/metrics.hpp"
#include "rvos/parallel.hpp"
#include "rvos/pipeline.hpp"
#include "rvos/report.hpp"
#include "rvos/sampler.hpp"

namespace rvos {

namespace fs = std::filesystem;

// One simulated expert: a segmenter backend plus sampling and propagation.
struct ExpertConfig {
  std::string name;
  std::string segmenter = "gt";
  std::string propagator = "nearest-key";
  std::size_t keyframes = 5;
  SamplingStrategy strategy = SamplingStrategy::uniform;
};

struct RunConfig {
  fs::path meta;
  fs::path gt;
  std::vector<fs::path> predictions;
  std::vector<std::string> labels;
  fs::path out;
  std::size_t keyframes = 5;
  SamplingStrategy strategy = SamplingStrategy::uniform;
  std::string segmenter = "gt";
  std::string propagator = "nearest-key";
  std::vector<ExpertConfig> experts;
  double tolerance = kDefaultBoundaryTolerance;
  std::uint64_t seed = 0;
  std::size_t workers = default_workers();
};

namespace run_detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(where + ": bad value for '" + key + "': " + e.what());
  }
}

inline std::size_t positive_count(const nlohmann::json& j, const char* key, const std::string& where) {
  const auto v = get_field<long long>(j, key, where);
  if (v < 1) throw validation_error(where + ": '" + std::string(key) + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

}  // namespace run_detail

// Parses a config document. Relative paths resolve against `base_dir`.
// Experts that omit fields inherit the top-level values.
inline RunConfig parse_run_config(const nlohmann::json& doc, const fs::path& base_dir = {}) {
  using run_detail::get_field;
  using run_detail::resolve;
  const std::string where = "config";
  if (!doc.is_object()) throw validation_error("config must be a JSON object");
  static const std::set<std::string> known{"meta",      "gt",        "predictions", "labels",
                                           "out",       "keyframes", "strategy",    "segmenter",
                                           "propagator", "experts",  "tolerance",   "seed",
                                           "workers"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw validation_error("config: unknown field '" + key + "'");
  }
  RunConfig cfg;
  if (doc.contains("meta")) cfg.meta = resolve(base_dir, get_field<std::string>(doc, "meta", where));
  if (doc.contains("gt")) cfg.gt = resolve(base_dir, get_field<std::string>(doc, "gt", where));
  if (doc.contains("out")) cfg.out = resolve(base_dir, get_field<std::string>(doc, "out", where));
  if (doc.contains("predictions")) {
    for (const auto& p : get_field<std::vector<std::string>>(doc, "predictions", where)) {
      cfg.predictions.push_back(resolve(base_dir, p));
    }
  }
  if (doc.contains("labels")) cfg.labels = get_field<std::vector<std::string>>(doc, "labels", where);
  if (doc.contains("keyframes")) cfg.keyframes = run_detail::positive_count(doc, "keyframes", where);
  if (doc.contains("strategy")) cfg.strategy = parse_strategy(get_field<std::string>(doc, "strategy", where));
  if (doc.contains("segmenter")) cfg.segmenter = get_field<std::string>(doc, "segmenter", where);
  if (doc.contains("propagator")) cfg.propagator = get_field<std::string>(doc, "propagator", where);
  if (doc.contains("tolerance")) cfg.tolerance = get_field<double>(doc, "tolerance", where);
  if (doc.contains("seed")) cfg.seed = get_field<std::uint64_t>(doc, "seed", where);
  if (doc.contains("workers")) cfg.workers = run_detail::positive_count(doc, "workers", where);
  if (doc.contains("experts")) {
    const auto& experts = doc["experts"];
    if (!experts.is_array()) throw validation_error("config: 'experts' must be a list");
    for (std::size_t i = 0; i < experts.size(); ++i) {
      const auto& e = experts[i];
      const std::string ewhere = "config experts[" + std::to_string(i) + "]";
      if (!e.is_object()) throw validation_error(ewhere + ": must be an object");
      ExpertConfig expert{"", cfg.segmenter, cfg.propagator, cfg.keyframes, cfg.strategy};
      for (const auto& [key, value] : e.items()) {
        if (key == "name") expert.name = get_field<std::string>(e, "name", ewhere);
        else if (key == "segmenter") expert.segmenter = get_field<std::string>(e, "segmenter", ewhere);
        else if (key == "propagator") expert.propagator = get_field<std::string>(e, "propagator", ewhere);
        else if (key == "keyframes") expert.keyframes = run_detail::positive_count(e, "keyframes", ewhere);
        else if (key == "strategy") expert.strategy = parse_strategy(get_field<std::string>(e, "strategy", ewhere));
        else throw validation_error(ewhere + ": unknown field '" + key + "'");
      }
      cfg.experts.push_back(std::move(expert));
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(path.string() + ": JSON parse error: " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

// The expert list a run will simulate: the configured experts, or a single
// expert built from the top-level fields. Names default to expert<k>.
inline std::vector<ExpertConfig> effective_experts(const RunConfig& cfg) {
  std::vector<ExpertConfig> experts = cfg.experts;
  if (experts.empty()) {
    experts.push_back({"", cfg.segmenter, cfg.propagator, cfg.keyframes, cfg.strategy});
  }
  std::set<std::string> names;
  for (std::size_t k = 0; k < experts.size(); ++k) {
    auto& name = experts[k].name;
    if (name.empty()) name = "expert" + std::to_string(k);
    if (name == "fused" || name.find('/') != std::string::npos || name == "." || name == "..") {
      throw validation_error("expert name '" + name + "' is reserved or not a plain directory name");
    }
    if (!names.insert(name).second) throw validation_error("duplicate expert name '" + name + "'");
  }
  return experts;
}

// Default seed for expert k when its segmenter spec carries none.
inline std::uint64_t expert_seed(std::uint64_t seed, std::size_t k) {
  return splitmix64(seed + static_cast<std::uint64_t>(k));
}

// ---------------------------------------------------------------------------
// Pre-flight validation

namespace run_detail {

inline void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw validation_error(std::string("missing required path: ") + what);
  if (!fs::is_regular_file(p)) throw validation_error(std::string(what) + " not found: " + p.string());
}

inline void require_dir(const fs::path& p, const char* what) {
  if (p.empty()) throw validation_error(std::string("missing required path: ") + what);
  if (!fs::is_directory(p)) throw validation_error(std::string(what) + " is not a directory: " + p.string());
}

inline bool within(const fs::path& inner, const fs::path& outer) {
  const auto rel = fs::weakly_canonical(inner).lexically_relative(fs::weakly_canonical(outer));
  return !rel.empty() && *rel.begin() != "..";
}

// Output must not land inside an input tree.
inline void require_separate_output(const fs::path& out, const std::vector<fs::path>& inputs) {
  if (out.empty()) throw validation_error("missing required path: output root (--out)");
  for (const auto& in : inputs) {
    if (!in.empty() && within(out, in)) {
      throw validation_error("output root " + out.string() + " lies inside input " + in.string());
    }
  }
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace run_detail

// ---------------------------------------------------------------------------
// Stages

// Runs the pipeline for every (video, expression) in the index. `gt` may be
// null when neither backend reads ground truth.
inline MaskTree simulate_tree(const DatasetIndex& index, const MaskTree* gt,
                              const ExpertConfig& expert, std::uint64_t seed, std::size_t workers) {
  const SegmenterSpec seg_spec = parse_segmenter_spec(expert.segmenter);
  const PropagatorSpec prop_spec = parse_propagator_spec(expert.propagator);
  const bool uses_gt = needs_ground_truth(seg_spec) || needs_ground_truth(prop_spec);
  if (uses_gt && gt == nullptr) {
    throw validation_error("expert '" + expert.name + "' needs ground truth (--gt)");
  }
  const PipelineConfig pipeline{expert.keyframes, expert.strategy};
  const auto keys = sequence_keys(index);
  std::vector<MaskSequence> results(keys.size());
  parallel_for(keys.size(), workers, [&](std::size_t i) {
    const auto& key = keys[i];
    const VideoRecord& video = index.videos.at(key.first);
    const MaskSequence* gt_seq = nullptr;
    if (uses_gt) {
      auto it = gt->find(key);
      if (it == gt->end()) throw validation_error("ground truth missing for " + key_string(key));
      gt_seq = &it->second;
    }
    auto segmenter = make_segmenter(seg_spec, key, gt_seq, seed);
    auto propagator = make_propagator(prop_spec, key, gt_seq, seed);
    results[i] = run_pipeline(video, find_expression(video, key.second), *segmenter, *propagator,
                              pipeline);
  });
  MaskTree tree;
  for (std::size_t i = 0; i < keys.size(); ++i) tree.emplace(keys[i], std::move(results[i]));
  return tree;
}

inline nlohmann::ordered_json expert_manifest(const ExpertConfig& expert, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["model"] = expert.name;
  j["segmenter"] = expert.segmenter;
  j["propagator"] = expert.propagator;
  j["keyframes"] = expert.keyframes;
  j["strategy"] = std::string(to_string(expert.strategy));
  j["seed"] = seed;
  return j;
}

inline bool config_needs_gt(const std::vector<ExpertConfig>& experts) {
  for (const auto& e : experts) {
    if (needs_ground_truth(parse_segmenter_spec(e.segmenter)) ||
        needs_ground_truth(parse_propagator_spec(e.propagator))) {
      return true;
    }
  }
  return false;
}

// simulate: one expert's prediction tree written to cfg.out.
inline void cmd_simulate(const RunConfig& cfg) {
  const auto experts = effective_experts(cfg);
  if (experts.size() != 1) throw validation_error("simulate runs exactly one expert");
  const bool uses_gt = config_needs_gt(experts);
  run_detail::require_file(cfg.meta, "metadata file (--meta)");
  if (uses_gt) run_detail::require_dir(cfg.gt, "ground-truth root (--gt)");
  run_detail::require_separate_output(cfg.out, {cfg.gt});

  const DatasetIndex index = load_index(cfg.meta);
  std::optional<MaskTree> gt;
  if (uses_gt) gt = load_mask_tree(cfg.gt, index, MaskSource::ground_truth, cfg.workers);
  const auto seed = expert_seed(cfg.seed, 0);
  const MaskTree tree = simulate_tree(index, gt ? &*gt : nullptr, experts[0], seed, cfg.workers);
  write_mask_tree(cfg.out, tree, cfg.workers);
  auto manifest = expert_manifest(experts[0], seed);
  manifest["config_seed"] = cfg.seed;
  run_detail::write_json(cfg.out / "run.json", manifest);
}

inline std::vector<PredictionSet> load_prediction_sets(const RunConfig& cfg, const DatasetIndex& index) {
  std::vector<PredictionSet> sets;
  for (const auto& root : cfg.predictions) {
    sets.push_back({root.filename().empty() ? root.parent_path().filename().string()
                                            : root.filename().string(),
                    load_mask_tree(root, index, MaskSource::prediction, cfg.workers)});
  }
  return sets;
}

// fuse: pixel vote over cfg.predictions, written to cfg.out.
inline void cmd_fuse(const RunConfig& cfg) {
  run_detail::require_file(cfg.meta, "metadata file (--meta)");
  if (cfg.predictions.empty()) throw validation_error("fuse needs at least one --in prediction root");
  for (const auto& p : cfg.predictions) run_detail::require_dir(p, "prediction root (--in)");
  run_detail::require_separate_output(cfg.out, cfg.predictions);

  const DatasetIndex index = load_index(cfg.meta);
  const auto sets = load_prediction_sets(cfg, index);
  const PredictionSet fused = fuse_sets(sets, cfg.workers);
  write_mask_tree(cfg.out, fused.sequences, cfg.workers);
  nlohmann::ordered_json manifest;
  manifest["model"] = fused.model_name;
  manifest["inputs"] = nlohmann::ordered_json::array();
  for (const auto& s : sets) manifest["inputs"].push_back(s.model_name);
  manifest["seed"] = cfg.seed;
  run_detail::write_json(cfg.out / "run.json", manifest);
}

// evaluate: scores cfg.predictions[0] against cfg.gt. Writes the CSV and
// summary under cfg.out when set.
inline AggregateReport cmd_evaluate(const RunConfig& cfg) {
  run_detail::require_file(cfg.meta, "metadata file (--meta)");
  run_detail::require_dir(cfg.gt, "ground-truth root (--gt)");
  if (cfg.predictions.size() != 1) throw validation_error("evaluate needs exactly one prediction root");
  run_detail::require_dir(cfg.predictions[0], "prediction root (--in)");
  if (!cfg.out.empty()) run_detail::require_separate_output(cfg.out, {cfg.gt, cfg.predictions[0]});

  const DatasetIndex index = load_index(cfg.meta);
  const AggregateReport report = evaluate(cfg.predictions[0], cfg.gt, index, cfg.tolerance, cfg.workers);
  if (!cfg.out.empty()) write_report(cfg.out, report, {{"seed", cfg.seed}});
  return report;
}

inline std::string cmd_report(const std::vector<SummaryRow>& summaries,
                              const std::vector<std::string>& labels) {
  return format_report_text(apply_labels(summaries, labels));
}

struct RunResult {
  std::vector<SummaryRow> summaries;  // one per expert, then "fused"
  std::string table;
};

// run: simulate every expert, fuse, evaluate all, report. Everything lands
// under cfg.out:
//   predictions/<name>/...   eval/<name>/{per_expression.csv,summary.json}
//   report.txt  report.csv  run.json
inline RunResult cmd_end_to_end(const RunConfig& cfg) {
  const auto experts = effective_experts(cfg);
  for (const auto& e : experts) {
    parse_segmenter_spec(e.segmenter);
    parse_propagator_spec(e.propagator);
  }
  run_detail::require_file(cfg.meta, "metadata file (--meta)");
  run_detail::require_dir(cfg.gt, "ground-truth root (--gt)");
  run_detail::require_separate_output(cfg.out, {cfg.gt});
  if (!(cfg.tolerance > 0.0)) throw validation_error("tolerance must be positive");

  std::string stage = "load";
  try {
    const DatasetIndex index = load_index(cfg.meta);
    const MaskTree gt = load_mask_tree(cfg.gt, index, MaskSource::ground_truth, cfg.workers);

    std::vector<PredictionSet> sets;
    RunResult result;
    for (std::size_t k = 0; k < experts.size(); ++k) {
      stage = "simulate " + experts[k].name;
      const auto seed = expert_seed(cfg.seed, k);
      sets.push_back({experts[k].name, simulate_tree(index, &gt, experts[k], seed, cfg.workers)});
      const fs::path tree_root = cfg.out / "predictions" / experts[k].name;
      write_mask_tree(tree_root, sets.back().sequences, cfg.workers);
      run_detail::write_json(tree_root / "run.json", expert_manifest(experts[k], seed));

      stage = "evaluate " + experts[k].name;
      const auto report = evaluate(sets.back().sequences, gt, index, cfg.tolerance, cfg.workers);
      write_report(cfg.out / "eval" / experts[k].name, report, {{"seed", cfg.seed}});
      result.summaries.push_back(summary_row(experts[k].name, report));
    }

    stage = "fuse";
    const PredictionSet fused = fuse_sets(sets, cfg.workers);
    write_mask_tree(cfg.out / "predictions" / "fused", fused.sequences, cfg.workers);
    nlohmann::ordered_json fused_manifest;
    fused_manifest["model"] = fused.model_name;
    fused_manifest["seed"] = cfg.seed;
    run_detail::write_json(cfg.out / "predictions" / "fused" / "run.json", fused_manifest);

    stage = "evaluate fused";
    const auto fused_report = evaluate(fused.sequences, gt, index, cfg.tolerance, cfg.workers);
    write_report(cfg.out / "eval" / "fused", fused_report, {{"seed", cfg.seed}});
    result.summaries.push_back(summary_row("fused", fused_report));

    stage = "report";
    result.table = format_report_text(result.summaries);
    write_text_file(cfg.out / "report.txt", result.table);
    write_text_file(cfg.out / "report.csv", format_report_csv(result.summaries));

    nlohmann::ordered_json manifest;
    manifest["seed"] = cfg.seed;
    manifest["tolerance"] = cfg.tolerance;
    manifest["experts"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < experts.size(); ++k) {
      manifest["experts"].push_back(expert_manifest(experts[k], expert_seed(cfg.seed, k)));
    }
    run_detail::write_json(cfg.out / "run.json", manifest);
    return result;
  } catch (const Error& e) {
    throw e.with_context("stage '" + stage + "'");
  }
}

}  // namespace rvos

#endif  // RVOS_RUN_HPP_
