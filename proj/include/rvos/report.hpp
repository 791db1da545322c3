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

#ifndef RVOS_REPORT_HPP_
#define RVOS_REPORT_HPP_

// Comparison tables over evaluation summaries. Values are stored as
// fractions and shown as percentages with two decimals; '*' marks the best
// value in each column (every tied row is marked).

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rvos/dataset.hpp"
#include "rvos/error.hpp"
#include "rvos/metrics.hpp"

namespace rvos {

struct SummaryRow {
  std::string label;
  double jf = 0.0;
  double j = 0.0;
  double f = 0.0;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

inline SummaryRow summary_row(std::string label, const AggregateReport& report) {
  return {std::move(label), report.jf, report.j, report.f};
}

namespace report_detail {

inline SummaryRow parse_row(const nlohmann::json& j, const std::string& fallback_label,
                            const std::string& where) {
  if (!j.is_object()) throw validation_error(where + ": summary must be a JSON object");
  SummaryRow row;
  row.label = j.contains("label") && j["label"].is_string() ? j["label"].get<std::string>()
                                                             : fallback_label;
  const std::array<std::pair<const char*, double*>, 3> fields{
      {{"J&F", &row.jf}, {"J", &row.j}, {"F", &row.f}}};
  for (const auto& [name, slot] : fields) {
    if (!j.contains(name) || !j[name].is_number()) {
      throw validation_error(where + ": missing numeric '" + name + "'");
    }
    *slot = j[name].get<double>();
    if (!(*slot >= 0.0 && *slot <= 1.0)) {
      throw validation_error(where + ": '" + name + "' must be a fraction in [0, 1]");
    }
  }
  return row;
}

}  // namespace report_detail

// Accepts a single summary object or an array of objects carrying "label".
inline std::vector<SummaryRow> load_summaries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open summary " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(path.string() + ": JSON parse error: " + e.what());
  }
  std::vector<SummaryRow> rows;
  const std::string fallback = path.parent_path().filename().string().empty()
                                   ? path.stem().string()
                                   : path.parent_path().filename().string();
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      rows.push_back(report_detail::parse_row(doc[i], fallback + "#" + std::to_string(i),
                                              path.string() + "[" + std::to_string(i) + "]"));
    }
  } else {
    rows.push_back(report_detail::parse_row(doc, fallback, path.string()));
  }
  return rows;
}

// Relabels rows when labels are given; an empty label list keeps the
// summaries' own labels.
inline std::vector<SummaryRow> apply_labels(std::vector<SummaryRow> rows,
                                            const std::vector<std::string>& labels) {
  if (rows.empty()) throw validation_error("report: need at least one summary");
  if (labels.empty()) return rows;
  if (labels.size() != rows.size()) {
    throw validation_error("report: " + std::to_string(labels.size()) + " labels for " +
                           std::to_string(rows.size()) + " summaries");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].label = labels[i];
  return rows;
}

struct BestMarks {
  std::vector<std::array<bool, 3>> marks;  // per row: J&F, J, F
};

inline BestMarks best_marks(const std::vector<SummaryRow>& rows) {
  BestMarks best;
  best.marks.assign(rows.size(), {false, false, false});
  if (rows.empty()) return best;
  const auto column = [](const SummaryRow& r, int c) { return c == 0 ? r.jf : c == 1 ? r.j : r.f; };
  for (int c = 0; c < 3; ++c) {
    double top = column(rows[0], c);
    for (const auto& r : rows) top = std::max(top, column(r, c));
    for (std::size_t i = 0; i < rows.size(); ++i) best.marks[i][static_cast<std::size_t>(c)] = column(rows[i], c) == top;
  }
  return best;
}

inline std::string format_report_text(const std::vector<SummaryRow>& rows) {
  if (rows.empty()) throw validation_error("report: need at least one summary");
  const auto best = best_marks(rows);
  std::size_t label_width = std::string("Model").size();
  for (const auto& r : rows) label_width = std::max(label_width, r.label.size());
  const auto pad_right = [](std::string s, std::size_t w) { return s + std::string(w - std::min(w, s.size()), ' '); };
  const auto pad_left = [](std::string s, std::size_t w) { return std::string(w - std::min(w, s.size()), ' ') + s; };
  constexpr std::size_t kCol = 8;

  std::string out = pad_right("Model", label_width) + " | " + pad_left("J&F", kCol) + " " +
                    pad_left("J", kCol) + " " + pad_left("F", kCol) + "\n";
  out += std::string(label_width, '-') + "-+-" + std::string(3 * kCol + 2, '-') + "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto cell = [&](double v, int c) {
      return pad_left(format_fixed(100.0 * v, 2) + (best.marks[i][static_cast<std::size_t>(c)] ? "*" : " "), kCol);
    };
    out += pad_right(rows[i].label, label_width) + " | " + cell(rows[i].jf, 0) + " " +
           cell(rows[i].j, 1) + " " + cell(rows[i].f, 2) + "\n";
  }
  return out;
}

inline std::string format_report_csv(const std::vector<SummaryRow>& rows) {
  if (rows.empty()) throw validation_error("report: need at least one summary");
  const auto best = best_marks(rows);
  std::string out = "label,JF,J,F,best_JF,best_J,best_F\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += rows[i].label + "," + format_fixed(100.0 * rows[i].jf, 2) + "," +
           format_fixed(100.0 * rows[i].j, 2) + "," + format_fixed(100.0 * rows[i].f, 2) + "," +
           (best.marks[i][0] ? "1" : "0") + "," + (best.marks[i][1] ? "1" : "0") + "," +
           (best.marks[i][2] ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace rvos

#endif  // RVOS_REPORT_HPP_
