// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include "doctest.h"
#include "skillassess/common.hpp"
#include "skillassess/error.hpp"
#include "skillassess/manifest.hpp"
#include "skillassess/report.hpp"
#include "test_util.hpp"

using namespace skillassess;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

std::size_t lines(const std::string& s) { return count(s, "\n"); }

LabeledReport labeled(const std::string& method, const std::string& setting, double iou) {
  EvalReport r;
  r.setting = setting;
  r.metrics["iou@0.70"] = iou;
  return {method, r};
}

}  // namespace

TEST_CASE("setting order") {
  CHECK(ordered_settings({"ZS3", "custom", "FS", "ZS1", "ZS2", "alpha"}) ==
        std::vector<std::string>{"FS", "ZS1", "ZS2", "ZS3", "alpha", "custom"});
  CHECK(parse_report_kind("drop-curve") == ReportKind::kDropCurve);
  CHECK(to_string(parse_report_kind("table")) == "table");
  CHECK_THROWS_AS(parse_report_kind("pie"), ArgumentError);
}

TEST_CASE("table and drop curve") {
  testing::TempDir dir("report");
  const std::vector<LabeledReport> one{labeled("ours", "ZS2", 60), labeled("ours", "FS", 80),
                                       labeled("ours", "ZS1", 70), labeled("ours", "ZS3", 40)};
  const auto t = emit_table(one, "iou@0.70", dir.path());
  const auto csv = read_file(t.csv);
  CHECK(lines(csv) == 5);
  CHECK(csv.find("ours,FS,80") != std::string::npos);
  CHECK(csv.find("ours,FS") < csv.find("ours,ZS1"));
  const auto svg = read_file(t.svg);
  CHECK(count(svg, "<polyline") == 1);
  CHECK(svg.rfind("<svg", 0) == 0);

  const auto d = emit_drop_curve(one, "iou@0.70", dir.path());
  const auto dcsv = read_file(d.csv);
  CHECK(dcsv.find("ours,ZS3,40.000000,50.000000") != std::string::npos);
  CHECK(dcsv.find("ours,FS,80.000000,0.000000") != std::string::npos);

  auto two = one;
  for (const auto& r : one) two.push_back(labeled("base", r.report.setting, 50));
  CHECK(count(read_file(emit_table(two, "iou@0.70", dir.path()).svg), "<polyline") == 2);

  auto misaligned = two;
  misaligned.pop_back();
  CHECK_THROWS_AS(emit_table(misaligned, "iou@0.70", dir.path()), AlignmentError);
  CHECK_THROWS_AS(emit_table(one, "rouge_l", dir.path()), ArgumentError);
  CHECK_THROWS_AS(emit_table({}, "iou@0.70", dir.path()), ArgumentError);
}

TEST_CASE("confusion heatmap and vocabulary data") {
  testing::TempDir dir("heat");
  Matrix m(3, 3);
  for (std::size_t i = 0; i < 9; ++i) m.data()[i] = static_cast<double>(i);
  const std::vector<std::string> labels{"a", "b", "c"};
  const auto out = emit_confusion("transfer", labels, labels, m, dir.path());
  CHECK(count(read_file(out.svg), "class=\"cell\"") == 9);
  CHECK(lines(read_file(out.csv)) == 4);
  CHECK_THROWS_AS(heatmap_svg("x", {"a"}, labels, m), ShapeError);

  const auto v = emit_vocab_cloud_data({{"balance", 2}, {"timing", 5}, {"footwork", 2}}, dir.path());
  CHECK(read_file(v.csv) == "attribute,frequency\ntiming,5\nbalance,2\nfootwork,2\n");
  CHECK(v.svg.empty());
}

TEST_CASE("experiment manifest") {
  testing::TempDir dir("manifest");
  write_file_atomic(dir.path() / "in.txt", "abc");
  const auto inputs = hash_paths({dir.path() / "in.txt"});
  CHECK(inputs.begin()->second == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto key = stage_key("extract", inputs, "k=v\n");
  CHECK(key == stage_key("extract", inputs, "k=v\n"));
  CHECK(key != stage_key("extract", inputs, "k=w\n"));
  CHECK(key != stage_key("split", inputs, "k=v\n"));

  ExperimentManifest man(dir.path() / "manifest.jsonl");
  CHECK(man.entries().empty());
  CHECK(man.experiment_id().empty());
  CHECK_FALSE(man.up_to_date(key).has_value());

  write_file_atomic(dir.path() / "out.txt", "result");
  StageEntry e{"extract", key, inputs, hash_paths({dir.path() / "out.txt"}), "k=v\n", 0.5};
  man.append(e);
  man.append(StageEntry{"split", "other", {}, {}, "", 0.1});
  CHECK(man.entries().size() == 2);
  CHECK_FALSE(man.experiment_id().empty());
  REQUIRE(man.up_to_date(key).has_value());
  CHECK(man.up_to_date(key)->stage == "extract");

  write_file_atomic(dir.path() / "out.txt", "tampered");
  CHECK_FALSE(man.up_to_date(key).has_value());
  std::filesystem::remove(dir.path() / "out.txt");
  CHECK_FALSE(man.up_to_date(key).has_value());

  std::filesystem::create_directories(dir.path() / "d" / "sub");
  write_file_atomic(dir.path() / "d" / "x", "1");
  write_file_atomic(dir.path() / "d" / "sub" / "y", "2");
  CHECK(hash_paths({dir.path() / "d"}).size() == 2);
}
