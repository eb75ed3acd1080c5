// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Attribute-set IoU with thresholded semantic matching, proficiency
// accuracy, transfer analysis and the evaluation report.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "skillassess/commentary.hpp"
#include "skillassess/common.hpp"
#include "skillassess/dataset.hpp"
#include "skillassess/matrix.hpp"
#include "skillassess/text_metrics.hpp"

namespace skillassess {

class SimilarityBackend {
 public:
  virtual ~SimilarityBackend() = default;
  // In [0, 1]; score(a, a) == 1; symmetric.
  virtual double score(std::string_view a, std::string_view b) const = 0;
  virtual std::string backend_id() const = 0;
};

// 1 iff the canonical forms are equal.
class ExactSimilarity : public SimilarityBackend {
 public:
  double score(std::string_view a, std::string_view b) const override;
  std::string backend_id() const override { return "exact"; }
};

// Explicit pair table; unlisted distinct pairs score 0.
class TableSimilarity : public SimilarityBackend {
 public:
  void set(std::string_view a, std::string_view b, double score);
  double score(std::string_view a, std::string_view b) const override;
  std::string backend_id() const override;

 private:
  std::map<std::pair<std::string, std::string>, double> table_;
};

// Scores recorded from an external phrase-similarity model. File: one JSON
// object per line {a, b, score}. Misses throw BackendError; identical
// canonical strings score 1 without a lookup.
class ReplaySimilarity : public SimilarityBackend {
 public:
  static ReplaySimilarity from_file(const std::filesystem::path& path);
  void add(std::string_view a, std::string_view b, double score);
  double score(std::string_view a, std::string_view b) const override;
  std::string backend_id() const override { return "replay:" + digest_; }

 private:
  std::map<std::pair<std::string, std::string>, double> table_;
  std::string digest_ = "empty";
};

std::unique_ptr<SimilarityBackend> make_similarity(std::string_view spec);

// Size of a maximum bipartite matching where (i, j) is an edge iff
// sim(pred_i, ref_j) >= threshold.
std::size_t max_matching(const std::vector<std::string>& pred, const std::vector<std::string>& ref,
                         double threshold, const SimilarityBackend& sim);

// m / (|pred| + |ref| - m). Both empty -> 1, one empty -> 0. Throws
// ArgumentError unless 0 < threshold_k <= 1.
double attribute_iou(const AttributeSet& pred, const AttributeSet& ref, double threshold_k,
                     const SimilarityBackend& sim);

// Mean IoU over every reference sample, x100. Missing predictions count as
// empty sets.
double corpus_iou_at_k(const std::map<std::string, AttributeSet>& predictions,
                       const std::map<std::string, AttributeSet>& references, double threshold_k,
                       const SimilarityBackend& sim);

double proficiency_accuracy(const std::vector<Proficiency>& predictions, const std::vector<Proficiency>& labels);
// Rows are true classes, columns predictions, both in `class_order`.
std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<Proficiency>& predictions,
                                                       const std::vector<Proficiency>& labels,
                                                       const std::vector<Proficiency>& class_order =
                                                           {kProficiencyOrder.begin(), kProficiencyOrder.end()});

// (score(baseline) - score(s)) / score(baseline) * 100.
std::map<std::string, double> relative_drop(const std::map<std::string, double>& scores,
                                            const std::string& baseline = "FS");

struct TransferMatrix {
  std::vector<std::string> labels;  // rows = train sport, cols = test sport
  Matrix values;
};

// Throws CompletenessError naming the first missing (train, test) pair.
TransferMatrix transfer_matrix(const std::map<std::pair<std::string, std::string>, double>& results,
                               std::vector<std::string> sport_order = {});

struct Prediction {
  std::string sample_id;
  std::optional<AttributeSet> attributes;
  std::optional<std::string> feedback;
  std::optional<Proficiency> proficiency;
};

nlohmann::json to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j, std::size_t line = 0);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);
std::string serialize_predictions(const std::vector<Prediction>& predictions);

struct EvalOptions {
  std::vector<double> iou_thresholds{0.7, 1.0};
  const SimilarityBackend* similarity = nullptr;  // exact when null
  const ReplayScorer* external_scorer = nullptr;  // replaces meteor/bert values
};

struct SampleScores {
  std::string sample_id;
  std::map<std::string, double> scores;
  std::map<std::string, std::string> fields;
};

struct EvalReport {
  std::string split_hash;
  std::string setting;  // FS | ZS1 | ZS2 | ZS3
  std::string similarity_backend;
  std::map<std::string, double> metrics;
  std::map<std::string, std::size_t> counts;
  std::vector<std::vector<std::size_t>> confusion;  // empty without proficiency predictions
  std::vector<SampleScores> samples;
};

std::string iou_metric_name(double threshold);

// Scores every test sample. Attribute references are the incorrect sets;
// feedback references are the samples' feedback text.
EvalReport evaluate_predictions(const std::vector<ClipSample>& test_samples,
                                const std::vector<Prediction>& predictions, const std::string& split_hash,
                                const std::string& setting, const EvalOptions& options = {});

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
// report.json and per_sample.csv. Fixed six-decimal formatting, no
// timestamps or absolute paths.
void write_eval_report(const std::filesystem::path& dir, const EvalReport& r);
EvalReport load_eval_report(const std::filesystem::path& report_json);
std::string per_sample_csv(const EvalReport& r);

// RFC 4180 quoting when needed.
std::string csv_field(std::string_view s);

}  // namespace skillassess
