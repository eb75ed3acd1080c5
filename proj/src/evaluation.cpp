// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "skillassess/error.hpp"
#include "skillassess/extraction.hpp"

namespace skillassess {

double ExactSimilarity::score(std::string_view a, std::string_view b) const {
  return normalize_attribute(a) == normalize_attribute(b) ? 1.0 : 0.0;
}

namespace {

std::pair<std::string, std::string> pair_key(std::string_view a, std::string_view b) {
  std::string x = normalize_attribute(a);
  std::string y = normalize_attribute(b);
  if (y < x) std::swap(x, y);
  return {std::move(x), std::move(y)};
}

}  // namespace

void TableSimilarity::set(std::string_view a, std::string_view b, double score) {
  if (!(score >= 0.0 && score <= 1.0)) throw ArgumentError("similarity scores must be in [0, 1]");
  table_[pair_key(a, b)] = score;
}

double TableSimilarity::score(std::string_view a, std::string_view b) const {
  auto key = pair_key(a, b);
  if (key.first == key.second) return 1.0;
  auto it = table_.find(key);
  return it == table_.end() ? 0.0 : it->second;
}

std::string TableSimilarity::backend_id() const {
  std::string blob;
  for (const auto& [k, v] : table_) blob += k.first + '\t' + k.second + '\t' + format_fixed(v) + '\n';
  return "table:" + sha256_hex(blob).substr(0, 16);
}

ReplaySimilarity ReplaySimilarity::from_file(const std::filesystem::path& path) {
  ReplaySimilarity out;
  const auto text = read_file(path);
  std::size_t lineno = 0;
  for (const auto& line : split(text, '\n')) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.add(j.at("a").get<std::string>(), j.at("b").get<std::string>(), j.at("score").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("bad similarity replay entry: ") + e.what());
    }
  }
  out.digest_ = sha256_hex(text).substr(0, 16);
  return out;
}

void ReplaySimilarity::add(std::string_view a, std::string_view b, double score) {
  if (!(score >= 0.0 && score <= 1.0)) throw ArgumentError("similarity scores must be in [0, 1]");
  table_[pair_key(a, b)] = score;
}

double ReplaySimilarity::score(std::string_view a, std::string_view b) const {
  const auto key = pair_key(a, b);
  if (key.first == key.second) return 1.0;
  auto it = table_.find(key);
  if (it == table_.end()) {
    throw BackendError("similarity replay has no entry for (" + key.first + ", " + key.second + ")");
  }
  return it->second;
}

std::unique_ptr<SimilarityBackend> make_similarity(std::string_view spec) {
  if (spec.empty() || spec == "exact") return std::make_unique<ExactSimilarity>();
  if (spec.substr(0, 7) == "replay:") {
    return std::make_unique<ReplaySimilarity>(ReplaySimilarity::from_file(std::string(spec.substr(7))));
  }
  throw ConfigError("unknown similarity backend '" + std::string(spec) + "' (expected exact or replay:<file>)");
}

std::size_t max_matching(const std::vector<std::string>& pred, const std::vector<std::string>& ref,
                         double threshold, const SimilarityBackend& sim) {
  std::vector<std::vector<std::size_t>> adj(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (sim.score(pred[i], ref[j]) >= threshold) adj[i].push_back(j);
    }
  }
  std::vector<long> match_of_ref(ref.size(), -1);
  std::vector<char> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t u) {
    for (std::size_t v : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      if (match_of_ref[v] < 0 || augment(static_cast<std::size_t>(match_of_ref[v]))) {
        match_of_ref[v] = static_cast<long>(u);
        return true;
      }
    }
    return false;
  };
  std::size_t m = 0;
  for (std::size_t u = 0; u < pred.size(); ++u) {
    seen.assign(ref.size(), 0);
    if (augment(u)) ++m;
  }
  return m;
}

double attribute_iou(const AttributeSet& pred, const AttributeSet& ref, double threshold_k,
                     const SimilarityBackend& sim) {
  if (!(threshold_k > 0.0 && threshold_k <= 1.0)) throw ArgumentError("IoU threshold must be in (0, 1]");
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  const std::vector<std::string> p(pred.begin(), pred.end());
  const std::vector<std::string> r(ref.begin(), ref.end());
  const double m = static_cast<double>(max_matching(p, r, threshold_k, sim));
  return m / (static_cast<double>(p.size() + r.size()) - m);
}

double corpus_iou_at_k(const std::map<std::string, AttributeSet>& predictions,
                       const std::map<std::string, AttributeSet>& references, double threshold_k,
                       const SimilarityBackend& sim) {
  if (references.empty()) throw ArgumentError("no reference samples");
  for (const auto& [id, _] : predictions) {
    if (!references.contains(id)) throw ArgumentError("prediction for unknown sample " + id);
  }
  static const AttributeSet kEmpty;
  double sum = 0.0;
  for (const auto& [id, ref] : references) {
    auto it = predictions.find(id);
    sum += attribute_iou(it == predictions.end() ? kEmpty : it->second, ref, threshold_k, sim);
  }
  return 100.0 * sum / static_cast<double>(references.size());
}

double proficiency_accuracy(const std::vector<Proficiency>& predictions, const std::vector<Proficiency>& labels) {
  if (predictions.size() != labels.size()) throw ArgumentError("predictions and labels differ in length");
  if (labels.empty()) throw ArgumentError("no labels to score");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i] ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<Proficiency>& predictions,
                                                       const std::vector<Proficiency>& labels,
                                                       const std::vector<Proficiency>& class_order) {
  if (predictions.size() != labels.size()) throw ArgumentError("predictions and labels differ in length");
  auto index_of = [&](Proficiency p) {
    auto it = std::find(class_order.begin(), class_order.end(), p);
    if (it == class_order.end()) throw ArgumentError("class " + std::string(to_string(p)) + " not in class order");
    return static_cast<std::size_t>(it - class_order.begin());
  };
  std::vector<std::vector<std::size_t>> m(class_order.size(), std::vector<std::size_t>(class_order.size(), 0));
  for (std::size_t i = 0; i < labels.size(); ++i) ++m[index_of(labels[i])][index_of(predictions[i])];
  return m;
}

std::map<std::string, double> relative_drop(const std::map<std::string, double>& scores, const std::string& baseline) {
  auto it = scores.find(baseline);
  if (it == scores.end()) throw ArgumentError("baseline setting " + baseline + " missing");
  if (!(it->second > 0.0)) throw ArgumentError("baseline score must be > 0 for a relative drop");
  std::map<std::string, double> out;
  for (const auto& [setting, s] : scores) {
    out[setting] = setting == baseline ? 0.0 : (it->second - s) / it->second * 100.0;
  }
  return out;
}

TransferMatrix transfer_matrix(const std::map<std::pair<std::string, std::string>, double>& results,
                               std::vector<std::string> sport_order) {
  if (sport_order.empty()) {
    std::set<std::string> sports;
    for (const auto& [k, _] : results) {
      sports.insert(k.first);
      sports.insert(k.second);
    }
    sport_order.assign(sports.begin(), sports.end());
  }
  TransferMatrix out;
  out.labels = sport_order;
  out.values = Matrix(sport_order.size(), sport_order.size());
  for (std::size_t i = 0; i < sport_order.size(); ++i) {
    for (std::size_t j = 0; j < sport_order.size(); ++j) {
      auto it = results.find({sport_order[i], sport_order[j]});
      if (it == results.end()) {
        throw CompletenessError("transfer grid is missing (train " + sport_order[i] + ", test " + sport_order[j] + ")");
      }
      out.values(i, j) = it->second;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction files

nlohmann::json to_json(const Prediction& p) {
  nlohmann::json j{{"sample_id", p.sample_id}};
  if (p.attributes) j["attributes"] = std::vector<std::string>(p.attributes->begin(), p.attributes->end());
  if (p.feedback) j["feedback"] = *p.feedback;
  if (p.proficiency) j["proficiency"] = std::string(to_string(*p.proficiency));
  return j;
}

Prediction prediction_from_json(const nlohmann::json& j, std::size_t line) {
  Prediction p;
  try {
    if (!j.is_object()) throw ValidationError("sample_id", "prediction must be an object", line);
    if (!j.contains("sample_id") || !j["sample_id"].is_string()) {
      throw ValidationError("sample_id", "missing or non-string sample_id", line);
    }
    p.sample_id = j["sample_id"].get<std::string>();
    if (j.contains("attributes")) {
      AttributeSet s;
      for (const auto& a : j["attributes"].get<std::vector<std::string>>()) {
        auto n = normalize_attribute(a);
        if (!n.empty()) s.insert(std::move(n));
      }
      p.attributes = std::move(s);
    }
    if (j.contains("feedback")) p.feedback = j["feedback"].get<std::string>();
    if (j.contains("proficiency")) {
      const auto raw = j["proficiency"].get<std::string>();
      p.proficiency = parse_proficiency(raw);
      if (!p.proficiency) throw ValidationError("proficiency", "unknown proficiency '" + raw + "'", line);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("prediction", e.what(), line);
  }
  return p;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  for (const auto& line : split(read_file(path), '\n')) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
    auto p = prediction_from_json(j, lineno);
    if (!seen.insert(p.sample_id).second) {
      throw DuplicationError("line " + std::to_string(lineno) + ": duplicate prediction for " + p.sample_id);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string serialize_predictions(const std::vector<Prediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) out += to_json(p).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Reports

std::string iou_metric_name(double threshold) { return "iou@" + format_fixed(threshold, 2); }

namespace {

bool mentions(const std::vector<std::string>& text_tokens, std::string_view phrase) {
  const auto p = metric_tokens(phrase);
  if (p.empty() || p.size() > text_tokens.size()) return false;
  return std::search(text_tokens.begin(), text_tokens.end(), p.begin(), p.end()) != text_tokens.end();
}

double round6(double v) {
  const double r = std::round(v * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;
}

}  // namespace

EvalReport evaluate_predictions(const std::vector<ClipSample>& test_samples,
                                const std::vector<Prediction>& predictions, const std::string& split_hash,
                                const std::string& setting, const EvalOptions& options) {
  if (test_samples.empty()) throw ArgumentError("no test samples to evaluate");
  ExactSimilarity exact;
  const SimilarityBackend& sim = options.similarity ? *options.similarity : exact;

  std::map<std::string, const ClipSample*> by_id;
  for (const auto& s : test_samples) by_id[s.sample_id] = &s;
  std::map<std::string, const Prediction*> pred_by_id;
  bool any_attr = false, any_feedback = false, any_prof = false;
  for (const auto& p : predictions) {
    if (!by_id.contains(p.sample_id)) throw ArgumentError("prediction for sample not in the test split: " + p.sample_id);
    pred_by_id[p.sample_id] = &p;
    any_attr |= p.attributes.has_value();
    any_feedback |= p.feedback.has_value();
    any_prof |= p.proficiency.has_value();
  }

  EvalReport report;
  report.split_hash = split_hash;
  report.setting = setting;
  report.similarity_backend = sim.backend_id();
  report.counts["test_samples"] = test_samples.size();
  report.counts["predictions"] = predictions.size();

  std::vector<std::string> cands;
  std::vector<std::vector<std::string>> refs;
  std::vector<Proficiency> prof_pred, prof_label;
  std::map<std::string, double> sums;
  std::size_t mention_all = 0, mention_hits = 0, mention_total = 0;

  for (const auto& s : test_samples) {
    const Prediction* p = pred_by_id.contains(s.sample_id) ? pred_by_id[s.sample_id] : nullptr;
    SampleScores row;
    row.sample_id = s.sample_id;
    row.fields["reference_attributes"] = join({s.attributes.begin(), s.attributes.end()}, "; ");
    if (any_attr) {
      const AttributeSet pred = p && p->attributes ? *p->attributes : AttributeSet{};
      row.fields["predicted_attributes"] = join({pred.begin(), pred.end()}, "; ");
      for (double k : options.iou_thresholds) {
        const double v = attribute_iou(pred, s.attributes, k, sim);
        row.scores[iou_metric_name(k)] = v;
        sums[iou_metric_name(k)] += v;
      }
    }
    if (any_feedback) {
      const std::string cand = p && p->feedback ? *p->feedback : std::string();
      row.fields["feedback"] = cand;
      cands.push_back(cand);
      refs.push_back({s.feedback_text});
      const double b = bleu4(cand, {s.feedback_text});
      const double r = rouge_l(cand, s.feedback_text);
      double m = meteor_like(cand, s.feedback_text);
      double bl = bert_like(cand, s.feedback_text, sim);
      if (options.external_scorer) {
        m = options.external_scorer->score("meteor", cand, s.feedback_text);
        bl = options.external_scorer->score("bert", cand, s.feedback_text);
      }
      row.scores["bleu4"] = b;
      row.scores["rouge_l"] = r;
      row.scores["meteor_like"] = m;
      row.scores["bert_like"] = bl;
      sums["rouge_l"] += r;
      sums["meteor_like"] += m;
      sums["bert_like"] += bl;
      const auto toks = metric_tokens(cand);
      std::size_t hit = 0;
      for (const auto& a : s.attributes) hit += mentions(toks, a) ? 1 : 0;
      mention_hits += hit;
      mention_total += s.attributes.size();
      const bool all = hit == s.attributes.size();
      mention_all += all ? 1 : 0;
      row.scores["attribute_mention"] = all ? 1.0 : 0.0;
    }
    if (any_prof && s.proficiency) {
      row.fields["proficiency_label"] = std::string(to_string(*s.proficiency));
      if (p && p->proficiency) {
        row.fields["proficiency_pred"] = std::string(to_string(*p->proficiency));
        prof_pred.push_back(*p->proficiency);
        prof_label.push_back(*s.proficiency);
      }
    }
    report.samples.push_back(std::move(row));
  }

  const double n = static_cast<double>(test_samples.size());
  if (any_attr) {
    for (double k : options.iou_thresholds) report.metrics[iou_metric_name(k)] = 100.0 * sums[iou_metric_name(k)] / n;
  }
  if (any_feedback) {
    report.metrics["bleu4"] = corpus_bleu4(cands, refs);
    report.metrics["rouge_l"] = sums["rouge_l"] / n;
    report.metrics["meteor_like"] = sums["meteor_like"] / n;
    report.metrics["bert_like"] = sums["bert_like"] / n;
    report.metrics["attribute_mention_rate"] = 100.0 * static_cast<double>(mention_all) / n;
    report.metrics["attribute_recall"] =
        mention_total ? 100.0 * static_cast<double>(mention_hits) / static_cast<double>(mention_total) : 100.0;
  }
  if (!prof_label.empty()) {
    report.metrics["proficiency_accuracy"] = proficiency_accuracy(prof_pred, prof_label);
    report.confusion = confusion_matrix(prof_pred, prof_label);
    report.counts["proficiency_scored"] = prof_label.size();
  }
  return report;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = round6(v);
  nlohmann::json j{{"setting", r.setting},
                   {"split_hash", r.split_hash},
                   {"similarity_backend", r.similarity_backend},
                   {"metrics", metrics},
                   {"counts", r.counts}};
  if (!r.confusion.empty()) {
    std::vector<std::string> labels;
    for (auto p : kProficiencyOrder) labels.emplace_back(to_string(p));
    j["confusion"] = {{"labels", labels}, {"counts", r.confusion}};
  }
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.setting = j.at("setting").get<std::string>();
    r.split_hash = j.at("split_hash").get<std::string>();
    r.similarity_backend = j.value("similarity_backend", "");
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.counts = j.value("counts", std::map<std::string, std::size_t>{});
    if (j.contains("confusion")) {
      r.confusion = j["confusion"].at("counts").get<std::vector<std::vector<std::size_t>>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("report", e.what());
  }
  return r;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string per_sample_csv(const EvalReport& r) {
  std::set<std::string> score_cols, field_cols;
  for (const auto& s : r.samples) {
    for (const auto& [k, _] : s.scores) score_cols.insert(k);
    for (const auto& [k, _] : s.fields) field_cols.insert(k);
  }
  std::ostringstream out;
  out << "sample_id";
  for (const auto& c : score_cols) out << ',' << csv_field(c);
  for (const auto& c : field_cols) out << ',' << csv_field(c);
  out << '\n';
  for (const auto& s : r.samples) {
    out << csv_field(s.sample_id);
    for (const auto& c : score_cols) {
      auto it = s.scores.find(c);
      out << ',' << (it == s.scores.end() ? std::string() : format_fixed(it->second));
    }
    for (const auto& c : field_cols) {
      auto it = s.fields.find(c);
      out << ',' << (it == s.fields.end() ? std::string() : csv_field(it->second));
    }
    out << '\n';
  }
  return out.str();
}

void write_eval_report(const std::filesystem::path& dir, const EvalReport& r) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "report.json", to_json(r).dump(2) + "\n");
  write_file_atomic(dir / "per_sample.csv", per_sample_csv(r));
}

EvalReport load_eval_report(const std::filesystem::path& report_json) {
  try {
    return eval_report_from_json(nlohmann::json::parse(read_file(report_json)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("report", report_json.string() + ": " + e.what());
  }
}

}  // namespace skillassess
