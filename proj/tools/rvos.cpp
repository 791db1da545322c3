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

// Command-line entry point: sample / simulate / fuse / evaluate / report / run.
//
// Exit codes: 0 success, 1 validation error, 2 runtime or backend error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rvos/error.hpp"
#include "rvos/metrics.hpp"
#include "rvos/report.hpp"
#include "rvos/run.hpp"
#include "rvos/sampler.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Flags mirror the config-file field names; a flag given on the command
// line wins over the file.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> meta;
  std::optional<std::string> gt;
  std::vector<std::string> predictions;
  std::vector<std::string> labels;
  std::optional<std::string> out;
  std::optional<std::size_t> keyframes;
  std::optional<std::string> strategy;
  std::vector<std::string> segmenters;
  std::optional<std::string> propagator;
  std::optional<double> tolerance;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

enum Flag : unsigned {
  kMeta = 1U << 0,
  kGt = 1U << 1,
  kPredictions = 1U << 2,
  kLabels = 1U << 3,
  kOut = 1U << 4,
  kSampling = 1U << 5,
  kBackends = 1U << 6,
  kTolerance = 1U << 7,
  kCommon = 1U << 8,
};

void add_flags(CLI::App* cmd, Overrides& o, unsigned flags) {
  cmd->add_option("--config", o.config, "JSON config file");
  if (flags & kMeta) cmd->add_option("--meta", o.meta, "meta_expressions.json");
  if (flags & kGt) cmd->add_option("--gt", o.gt, "ground-truth mask tree");
  if (flags & kPredictions) cmd->add_option("--in,--predictions", o.predictions, "prediction tree (repeatable)");
  if (flags & kLabels) cmd->add_option("--label,--labels", o.labels, "row label (repeatable)");
  if (flags & kOut) cmd->add_option("--out", o.out, "output root");
  if (flags & kSampling) {
    cmd->add_option("--keyframes", o.keyframes, "number of key frames")->check(CLI::PositiveNumber);
    cmd->add_option("--strategy", o.strategy, "uniform | first_k");
  }
  if (flags & kBackends) {
    cmd->add_option("--segmenter", o.segmenters,
                    "gt | gt-noise:<rate>[:seed=<n>] | precomputed:<root> (repeatable for run)");
    cmd->add_option("--propagator", o.propagator,
                    "nearest-key[:window=<w>] | decay-noise:<base>:<growth>[:seed=<n>]");
  }
  if (flags & kTolerance) cmd->add_option("--tolerance", o.tolerance, "boundary tolerance ratio");
  if (flags & kCommon) {
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--workers", o.workers, "worker threads (default: all cores)")->check(CLI::PositiveNumber);
  }
}

rvos::RunConfig build_config(const Overrides& o) {
  rvos::RunConfig cfg = o.config ? rvos::load_run_config(*o.config) : rvos::RunConfig{};
  if (o.meta) cfg.meta = *o.meta;
  if (o.gt) cfg.gt = *o.gt;
  if (!o.predictions.empty()) cfg.predictions.assign(o.predictions.begin(), o.predictions.end());
  if (!o.labels.empty()) cfg.labels = o.labels;
  if (o.out) cfg.out = *o.out;
  if (o.keyframes) cfg.keyframes = *o.keyframes;
  if (o.strategy) cfg.strategy = rvos::parse_strategy(*o.strategy);
  if (o.propagator) cfg.propagator = *o.propagator;
  if (o.tolerance) cfg.tolerance = *o.tolerance;
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  // Sampling/backend flags replace per-expert settings too.
  if (!o.segmenters.empty()) {
    cfg.segmenter = o.segmenters.front();
    if (o.segmenters.size() > 1 || !cfg.experts.empty()) {
      std::vector<rvos::ExpertConfig> experts;
      for (std::size_t k = 0; k < o.segmenters.size(); ++k) {
        rvos::ExpertConfig e{"", o.segmenters[k], cfg.propagator, cfg.keyframes, cfg.strategy};
        if (k < cfg.experts.size()) e.name = cfg.experts[k].name;
        experts.push_back(std::move(e));
      }
      cfg.experts = std::move(experts);
    }
  }
  for (auto& e : cfg.experts) {
    if (o.propagator) e.propagator = *o.propagator;
    if (o.keyframes) e.keyframes = *o.keyframes;
    if (o.strategy) e.strategy = cfg.strategy;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Key-frame video segmentation pipeline, mask voting and J&F evaluation"};
  app.require_subcommand(1);

  Overrides o;

  std::size_t frames = 0;
  std::size_t sample_keyframes = 5;
  std::string sample_strategy = "uniform";
  auto* sample = app.add_subcommand("sample", "print key-frame indices as JSON");
  sample->add_option("--frames", frames, "video length N")->required();
  sample->add_option("--keyframes", sample_keyframes, "number of key frames M");
  sample->add_option("--strategy", sample_strategy, "uniform | first_k");

  auto* simulate = app.add_subcommand("simulate", "run the key-frame pipeline into a prediction tree");
  add_flags(simulate, o, kMeta | kGt | kOut | kSampling | kBackends | kCommon);

  auto* fuse = app.add_subcommand("fuse", "pixel-vote several prediction trees");
  add_flags(fuse, o, kMeta | kPredictions | kOut | kCommon);

  auto* evaluate = app.add_subcommand("evaluate", "score a prediction tree (J, F, J&F)");
  add_flags(evaluate, o, kMeta | kGt | kPredictions | kOut | kTolerance | kCommon);

  std::vector<std::string> summaries;
  auto* report = app.add_subcommand("report", "tabulate evaluation summaries");
  report->add_option("--summary", summaries, "summary.json (repeatable)")->required();
  add_flags(report, o, kLabels | kOut);

  auto* run = app.add_subcommand("run", "simulate experts, fuse, evaluate and report");
  add_flags(run, o, kMeta | kGt | kOut | kSampling | kBackends | kTolerance | kCommon);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (sample->parsed()) {
      const auto plan = rvos::make_plan(rvos::parse_strategy(sample_strategy), frames, sample_keyframes);
      std::cout << nlohmann::json(plan.indices).dump() << "\n";
    } else if (simulate->parsed()) {
      rvos::cmd_simulate(build_config(o));
    } else if (fuse->parsed()) {
      rvos::cmd_fuse(build_config(o));
    } else if (evaluate->parsed()) {
      const auto cfg = build_config(o);
      const auto result = rvos::cmd_evaluate(cfg);
      std::cout << rvos::summary_json(result, {{"seed", cfg.seed}});
    } else if (report->parsed()) {
      const auto cfg = build_config(o);
      std::vector<rvos::SummaryRow> rows;
      for (const auto& s : summaries) {
        auto loaded = rvos::load_summaries(s);
        rows.insert(rows.end(), loaded.begin(), loaded.end());
      }
      rows = rvos::apply_labels(std::move(rows), cfg.labels);
      const std::string table = rvos::format_report_text(rows);
      if (!cfg.out.empty()) {
        rvos::write_text_file(cfg.out / "report.txt", table);
        rvos::write_text_file(cfg.out / "report.csv", rvos::format_report_csv(rows));
      }
      std::cout << table;
    } else if (run->parsed()) {
      const auto result = rvos::cmd_end_to_end(build_config(o));
      std::cout << result.table;
    }
  } catch (const rvos::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == rvos::ErrorKind::validation ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
