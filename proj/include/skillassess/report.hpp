// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// CSV tables and static SVG charts for evaluation results.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "skillassess/evaluation.hpp"

namespace skillassess {

enum class ReportKind { kTable, kDropCurve, kConfusion, kVocabCloudData };

ReportKind parse_report_kind(std::string_view s);
std::string_view to_string(ReportKind k);

struct LabeledReport {
  std::string method;
  EvalReport report;
};

struct EmittedFiles {
  std::filesystem::path csv;
  std::filesystem::path svg;  // empty for vocab-cloud-data
};

// FS, ZS1, ZS2, ZS3 first, anything else after in lexical order.
std::vector<std::string> ordered_settings(const std::vector<std::string>& settings);

struct Series {
  std::string label;
  std::vector<double> values;  // aligned with the x labels
};

std::string line_chart_svg(const std::string& title, const std::vector<std::string>& x_labels,
                           const std::vector<Series>& series, const std::string& y_label);
std::string heatmap_svg(const std::string& title, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const Matrix& values);

// One row per (method, setting) with `metric`. Throws AlignmentError when
// the methods cover different setting sets, ArgumentError when a report
// lacks the metric.
EmittedFiles emit_table(const std::vector<LabeledReport>& reports, const std::string& metric,
                        const std::filesystem::path& out_dir);
// Relative drop of `metric` against FS per method.
EmittedFiles emit_drop_curve(const std::vector<LabeledReport>& reports, const std::string& metric,
                             const std::filesystem::path& out_dir);
EmittedFiles emit_confusion(const std::string& title, const std::vector<std::string>& row_labels,
                            const std::vector<std::string>& col_labels, const Matrix& values,
                            const std::filesystem::path& out_dir);
EmittedFiles emit_vocab_cloud_data(const std::map<std::string, std::size_t>& frequencies,
                                   const std::filesystem::path& out_dir);

}  // namespace skillassess
