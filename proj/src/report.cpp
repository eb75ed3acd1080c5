// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "skillassess/common.hpp"
#include "skillassess/error.hpp"

namespace skillassess {

ReportKind parse_report_kind(std::string_view s) {
  if (s == "table") return ReportKind::kTable;
  if (s == "drop-curve") return ReportKind::kDropCurve;
  if (s == "confusion") return ReportKind::kConfusion;
  if (s == "vocab-cloud-data") return ReportKind::kVocabCloudData;
  throw ArgumentError("unknown report kind '" + std::string(s) +
                      "' (expected table, drop-curve, confusion or vocab-cloud-data)");
}

std::string_view to_string(ReportKind k) {
  switch (k) {
    case ReportKind::kTable:
      return "table";
    case ReportKind::kDropCurve:
      return "drop-curve";
    case ReportKind::kConfusion:
      return "confusion";
    case ReportKind::kVocabCloudData:
      return "vocab-cloud-data";
  }
  return "table";
}

std::vector<std::string> ordered_settings(const std::vector<std::string>& settings) {
  static const std::vector<std::string> kCanonical{"FS", "ZS1", "ZS2", "ZS3"};
  std::set<std::string> rest(settings.begin(), settings.end());
  std::vector<std::string> out;
  for (const auto& s : kCanonical) {
    if (rest.erase(s)) out.push_back(s);
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string num(double v) { return format_fixed(v, 2); }

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

// method -> setting -> score
using Grid = std::map<std::string, std::map<std::string, double>>;

Grid aligned_grid(const std::vector<LabeledReport>& reports, const std::string& metric,
                  std::vector<std::string>& methods, std::vector<std::string>& settings) {
  if (reports.empty()) throw ArgumentError("no reports given");
  Grid grid;
  for (const auto& r : reports) {
    auto it = r.report.metrics.find(metric);
    if (it == r.report.metrics.end()) {
      throw ArgumentError("report for " + r.method + "/" + r.report.setting + " has no metric " + metric);
    }
    if (!grid.contains(r.method)) methods.push_back(r.method);
    if (!grid[r.method].emplace(r.report.setting, it->second).second) {
      throw AlignmentError("duplicate setting " + r.report.setting + " for method " + r.method);
    }
  }
  std::set<std::string> reference;
  for (const auto& [s, _] : grid.begin()->second) reference.insert(s);
  for (const auto& [m, row] : grid) {
    std::set<std::string> have;
    for (const auto& [s, _] : row) have.insert(s);
    if (have != reference) {
      throw AlignmentError("method " + m + " covers settings {" + join({have.begin(), have.end()}, ",") +
                           "} but " + grid.begin()->first + " covers {" +
                           join({reference.begin(), reference.end()}, ",") + "}");
    }
  }
  settings = ordered_settings({reference.begin(), reference.end()});
  return grid;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::vector<std::string>& x_labels,
                           const std::vector<Series>& series, const std::string& y_label) {
  const double w = 640, h = 400, left = 70, right = 150, top = 40, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const auto& s : series) {
    for (double v : s.values) {
      if (first) {
        lo = hi = v;
        first = false;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  lo = std::min(lo, 0.0);
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const auto n = x_labels.size();
  auto px = [&](std::size_t i) { return left + (n <= 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(n - 1)); };
  auto py = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    o << "<text x=\"" << left - 6 << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << num(v) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    o << "<text x=\"" << num(px(i)) << "\" y=\"" << top + ph + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(x_labels[i])
      << "</text>\n";
  }
  o << "<text x=\"18\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 18 " << top + ph / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(y_label)
    << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].values.size(); ++i) {
      if (i) o << ' ';
      o << num(px(i)) << ',' << num(py(series[s].values[i]));
    }
    o << "\"/>\n";
    for (std::size_t i = 0; i < series[s].values.size(); ++i) {
      o << "<circle cx=\"" << num(px(i)) << "\" cy=\"" << num(py(series[s].values[i])) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
    }
    o << "<text x=\"" << left + pw + 12 << "\" y=\"" << top + 16 + 18 * s << "\" fill=\"" << color
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(series[s].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string heatmap_svg(const std::string& title, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const Matrix& values) {
  if (values.rows() != row_labels.size() || values.cols() != col_labels.size()) {
    throw ShapeError("heatmap labels do not match the matrix shape");
  }
  const double cell = 56, left = 130, top = 70;
  const double w = left + cell * static_cast<double>(col_labels.size()) + 20;
  const double h = top + cell * static_cast<double>(row_labels.size()) + 20;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values.data()[i];
    if (i == 0) lo = hi = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  for (std::size_t j = 0; j < col_labels.size(); ++j) {
    o << "<text class=\"col-label\" x=\"" << num(left + cell * (static_cast<double>(j) + 0.5)) << "\" y=\""
      << top - 8 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << xml_escape(col_labels[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < row_labels.size(); ++i) {
    o << "<text class=\"row-label\" x=\"" << left - 8 << "\" y=\"" << num(top + cell * (static_cast<double>(i) + 0.5) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(row_labels[i])
      << "</text>\n";
    for (std::size_t j = 0; j < col_labels.size(); ++j) {
      const double v = values(i, j);
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      const int shade = static_cast<int>(std::lround(235.0 - 180.0 * t));
      o << "<rect class=\"cell\" x=\"" << num(left + cell * static_cast<double>(j)) << "\" y=\""
        << num(top + cell * static_cast<double>(i)) << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\" stroke=\"white\"/>\n";
      o << "<text x=\"" << num(left + cell * (static_cast<double>(j) + 0.5)) << "\" y=\""
        << num(top + cell * (static_cast<double>(i) + 0.5) + 4)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << num(v) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

EmittedFiles emit_table(const std::vector<LabeledReport>& reports, const std::string& metric,
                        const std::filesystem::path& out_dir) {
  std::vector<std::string> methods, settings;
  const Grid grid = aligned_grid(reports, metric, methods, settings);
  std::string csv = "method,setting," + csv_field(metric) + "\n";
  std::vector<Series> series;
  for (const auto& m : methods) {
    Series s{m, {}};
    for (const auto& st : settings) {
      const double v = grid.at(m).at(st);
      csv += csv_field(m) + "," + csv_field(st) + "," + format_fixed(v) + "\n";
      s.values.push_back(v);
    }
    series.push_back(std::move(s));
  }
  std::filesystem::create_directories(out_dir);
  EmittedFiles out{out_dir / "table.csv", out_dir / "table.svg"};
  write_file_atomic(out.csv, csv);
  write_file_atomic(out.svg, line_chart_svg(metric + " by setting", settings, series, metric));
  return out;
}

EmittedFiles emit_drop_curve(const std::vector<LabeledReport>& reports, const std::string& metric,
                             const std::filesystem::path& out_dir) {
  std::vector<std::string> methods, settings;
  const Grid grid = aligned_grid(reports, metric, methods, settings);
  std::string csv = "method,setting,score,relative_drop\n";
  std::vector<Series> series;
  for (const auto& m : methods) {
    const auto drops = relative_drop(grid.at(m), "FS");
    Series s{m, {}};
    for (const auto& st : settings) {
      csv += csv_field(m) + "," + csv_field(st) + "," + format_fixed(grid.at(m).at(st)) + "," +
             format_fixed(drops.at(st)) + "\n";
      s.values.push_back(drops.at(st));
    }
    series.push_back(std::move(s));
  }
  std::filesystem::create_directories(out_dir);
  EmittedFiles out{out_dir / "drop_curve.csv", out_dir / "drop_curve.svg"};
  write_file_atomic(out.csv, csv);
  write_file_atomic(out.svg, line_chart_svg("relative drop of " + metric + " vs FS (%)", settings, series, "drop (%)"));
  return out;
}

EmittedFiles emit_confusion(const std::string& title, const std::vector<std::string>& row_labels,
                            const std::vector<std::string>& col_labels, const Matrix& values,
                            const std::filesystem::path& out_dir) {
  const auto svg = heatmap_svg(title, row_labels, col_labels, values);
  std::string csv = "row";
  for (const auto& c : col_labels) csv += "," + csv_field(c);
  csv += "\n";
  for (std::size_t i = 0; i < row_labels.size(); ++i) {
    csv += csv_field(row_labels[i]);
    for (std::size_t j = 0; j < col_labels.size(); ++j) csv += "," + format_fixed(values(i, j));
    csv += "\n";
  }
  std::filesystem::create_directories(out_dir);
  EmittedFiles out{out_dir / "confusion.csv", out_dir / "confusion.svg"};
  write_file_atomic(out.csv, csv);
  write_file_atomic(out.svg, svg);
  return out;
}

EmittedFiles emit_vocab_cloud_data(const std::map<std::string, std::size_t>& frequencies,
                                   const std::filesystem::path& out_dir) {
  std::vector<std::pair<std::string, std::size_t>> rows(frequencies.begin(), frequencies.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string csv = "attribute,frequency\n";
  for (const auto& [a, n] : rows) csv += csv_field(a) + "," + std::to_string(n) + "\n";
  std::filesystem::create_directories(out_dir);
  EmittedFiles out{out_dir / "vocab_cloud.csv", {}};
  write_file_atomic(out.csv, csv);
  return out;
}

}  // namespace skillassess
