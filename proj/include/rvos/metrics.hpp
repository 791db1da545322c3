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

#ifndef RVOS_METRICS_HPP_
#define RVOS_METRICS_HPP_

// Region similarity J (mean per-frame IoU), contour accuracy F (mean
// per-frame boundary F-measure) and J&F = (J + F) / 2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "rvos/dataset.hpp"
#include "rvos/error.hpp"
#include "rvos/mask.hpp"
#include "rvos/parallel.hpp"

namespace rvos {

inline constexpr double kDefaultBoundaryTolerance = 0.008;

// Foreground pixels with a background 4-neighbour; off-frame counts as
// background.
inline BinaryMask boundary_pixels(const BinaryMask& mask) {
  return mask_and(mask, complement(erode4(mask)));
}

// Dilation by the disk {(dy, dx) : dy^2 + dx^2 <= r^2}. Each row offset dy
// contributes a horizontal run of half-width floor(sqrt(r^2 - dy^2)), taken
// from a per-row prefix count.
inline BinaryMask dilate_disk(const BinaryMask& mask, std::size_t radius) {
  if (radius == 0) return mask;
  const std::size_t h = mask.height(), w = mask.width();
  BinaryMask out(h, w);
  const auto r = static_cast<std::ptrdiff_t>(radius);

  // prefix[row * (w + 1) + c] = foreground count in row[0, c).
  std::vector<std::uint32_t> prefix(h * (w + 1), 0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      prefix[y * (w + 1) + x + 1] = prefix[y * (w + 1) + x] + (mask.at(y, x) ? 1U : 0U);
    }
  }
  std::vector<std::ptrdiff_t> half_width(static_cast<std::size_t>(r) + 1);
  for (std::ptrdiff_t dy = 0; dy <= r; ++dy) {
    std::ptrdiff_t hw = 0;
    while ((hw + 1) * (hw + 1) + dy * dy <= r * r) ++hw;
    half_width[static_cast<std::size_t>(dy)] = hw;
  }
  const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    for (std::ptrdiff_t x = 0; x < iw; ++x) {
      bool hit = false;
      for (std::ptrdiff_t dy = -r; dy <= r && !hit; ++dy) {
        const std::ptrdiff_t sy = y + dy;
        if (sy < 0 || sy >= ih) continue;
        const std::ptrdiff_t hw = half_width[static_cast<std::size_t>(dy < 0 ? -dy : dy)];
        const auto lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, x - hw));
        const auto hi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(iw, x + hw + 1));
        const std::size_t row = static_cast<std::size_t>(sy) * (w + 1);
        hit = prefix[row + hi] > prefix[row + lo];
      }
      if (hit) out.set(static_cast<std::size_t>(y), static_cast<std::size_t>(x), true);
    }
  }
  return out;
}

inline std::size_t boundary_radius(std::size_t height, std::size_t width, double tolerance_ratio) {
  const double diagonal = std::hypot(static_cast<double>(height), static_cast<double>(width));
  return static_cast<std::size_t>(std::ceil(tolerance_ratio * diagonal));
}

struct BoundaryMatch {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

inline BoundaryMatch boundary_match(const BinaryMask& pred, const BinaryMask& gt,
                                    double tolerance_ratio = kDefaultBoundaryTolerance) {
  pred.require_same_shape(gt);
  if (!(tolerance_ratio > 0.0)) {
    throw validation_error("boundary tolerance must be positive, got " + std::to_string(tolerance_ratio));
  }
  const BinaryMask pred_b = boundary_pixels(pred);
  const BinaryMask gt_b = boundary_pixels(gt);
  const std::size_t n_pred = pred_b.count(), n_gt = gt_b.count();
  if (n_pred == 0 && n_gt == 0) return {1.0, 1.0, 1.0};
  if (n_pred == 0 || n_gt == 0) return {0.0, 0.0, 0.0};

  const std::size_t radius = boundary_radius(pred.height(), pred.width(), tolerance_ratio);
  const double precision = static_cast<double>(intersection_count(pred_b, dilate_disk(gt_b, radius))) /
                           static_cast<double>(n_pred);
  const double recall = static_cast<double>(intersection_count(gt_b, dilate_disk(pred_b, radius))) /
                        static_cast<double>(n_gt);
  if (precision + recall == 0.0) return {0.0, 0.0, 0.0};
  return {precision, recall, 2.0 * precision * recall / (precision + recall)};
}

inline double boundary_f(const BinaryMask& pred, const BinaryMask& gt,
                         double tolerance_ratio = kDefaultBoundaryTolerance) {
  return boundary_match(pred, gt, tolerance_ratio).f;
}

namespace metrics_detail {

inline void require_aligned(const MaskSequence& pred, const MaskSequence& gt) {
  if (pred.size() != gt.size()) {
    throw validation_error("sequence length mismatch: prediction has " + std::to_string(pred.size()) +
                           " frames, ground truth " + std::to_string(gt.size()));
  }
  if (gt.empty()) throw validation_error("cannot score an empty sequence");
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (pred.name(t) != gt.name(t)) {
      throw validation_error("frame " + std::to_string(t) + " misaligned: prediction '" +
                             pred.name(t) + "' vs ground truth '" + gt.name(t) + "'");
    }
  }
}

}  // namespace metrics_detail

inline double region_j(const MaskSequence& pred, const MaskSequence& gt) {
  metrics_detail::require_aligned(pred, gt);
  double total = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) total += iou(pred.mask(t), gt.mask(t));
  return total / static_cast<double>(gt.size());
}

inline double contour_f(const MaskSequence& pred, const MaskSequence& gt,
                        double tolerance_ratio = kDefaultBoundaryTolerance) {
  metrics_detail::require_aligned(pred, gt);
  double total = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    total += boundary_f(pred.mask(t), gt.mask(t), tolerance_ratio);
  }
  return total / static_cast<double>(gt.size());
}

struct MetricsRecord {
  std::string video_id;
  std::string expression_id;
  double j = 0.0;
  double f = 0.0;
  double jf = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline MetricsRecord score_sequence(const SequenceKey& key, const MaskSequence& pred,
                                    const MaskSequence& gt,
                                    double tolerance_ratio = kDefaultBoundaryTolerance) {
  MetricsRecord r{key.first, key.second, region_j(pred, gt), contour_f(pred, gt, tolerance_ratio), 0.0};
  r.jf = (r.j + r.f) / 2.0;
  return r;
}

// Global values are unweighted means over expressions. An empty report
// scores zero.
struct AggregateReport {
  std::vector<MetricsRecord> records;  // ordered by (video_id, expression_id)
  double j = 0.0;
  double f = 0.0;
  double jf = 0.0;

  friend bool operator==(const AggregateReport&, const AggregateReport&) = default;
};

inline AggregateReport aggregate(std::vector<MetricsRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.video_id, a.expression_id) < std::tie(b.video_id, b.expression_id);
  });
  AggregateReport report;
  report.records = std::move(records);
  if (report.records.empty()) return report;
  for (const auto& r : report.records) {
    report.j += r.j;
    report.f += r.f;
    report.jf += r.jf;
  }
  const auto n = static_cast<double>(report.records.size());
  report.j /= n;
  report.f /= n;
  report.jf /= n;
  return report;
}

// Scores already-loaded trees. Both must hold every key of `index`.
inline AggregateReport evaluate(const MaskTree& pred, const MaskTree& gt, const DatasetIndex& index,
                                double tolerance_ratio = kDefaultBoundaryTolerance,
                                std::size_t workers = default_workers()) {
  const auto keys = sequence_keys(index);
  std::vector<MetricsRecord> records(keys.size());
  parallel_for(keys.size(), workers, [&](std::size_t i) {
    const auto p = pred.find(keys[i]);
    const auto g = gt.find(keys[i]);
    if (p == pred.end()) throw validation_error("prediction missing for " + key_string(keys[i]));
    if (g == gt.end()) throw validation_error("ground truth missing for " + key_string(keys[i]));
    try {
      records[i] = score_sequence(keys[i], p->second, g->second, tolerance_ratio);
    } catch (const Error& e) {
      throw e.with_context(key_string(keys[i]));
    }
  });
  return aggregate(std::move(records));
}

inline AggregateReport evaluate(const std::filesystem::path& pred_root,
                                const std::filesystem::path& gt_root, const DatasetIndex& index,
                                double tolerance_ratio = kDefaultBoundaryTolerance,
                                std::size_t workers = default_workers()) {
  const MaskTree gt = load_mask_tree(gt_root, index, MaskSource::ground_truth, workers);
  const MaskTree pred = load_mask_tree(pred_root, index, MaskSource::prediction, workers);
  return evaluate(pred, gt, index, tolerance_ratio, workers);
}

// ---------------------------------------------------------------------------
// Output formats

inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

inline std::string format_fixed(double v, int decimals) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(decimals);
  out << v;
  return out.str();
}

// video_id,expression_id,J,F,JF with six decimals.
inline std::string records_csv(const AggregateReport& report) {
  std::string csv = "video_id,expression_id,J,F,JF\n";
  for (const auto& r : report.records) {
    csv += r.video_id + "," + r.expression_id + "," + format_fixed(r.j, 6) + "," +
           format_fixed(r.f, 6) + "," + format_fixed(r.jf, 6) + "\n";
  }
  return csv;
}

// {"J&F": x, "J": y, "F": z} rounded to four decimals, plus any extra fields.
inline std::string summary_json(const AggregateReport& report,
                                const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json j;
  j["J&F"] = round4(report.jf);
  j["J"] = round4(report.j);
  j["F"] = round4(report.f);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j.dump() + "\n";
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw runtime_error("write failed for " + path.string());
}

// Writes per_expression.csv and summary.json under `out_dir`.
inline void write_report(const std::filesystem::path& out_dir, const AggregateReport& report,
                         const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  write_text_file(out_dir / "per_expression.csv", records_csv(report));
  write_text_file(out_dir / "summary.json", summary_json(report, extra));
}

}  // namespace rvos

#endif  // RVOS_METRICS_HPP_
