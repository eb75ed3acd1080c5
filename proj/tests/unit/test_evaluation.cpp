// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "skillassess/error.hpp"
#include "skillassess/evaluation.hpp"
#include "test_util.hpp"

using namespace skillassess;

namespace {

// Largest matching by exhaustive search over assignments.
std::size_t brute_matching(const std::vector<std::string>& p, const std::vector<std::string>& r, double k,
                           const SimilarityBackend& sim, std::size_t i = 0, std::vector<char>* used = nullptr) {
  std::vector<char> local(r.size(), 0);
  if (used == nullptr) used = &local;
  if (i == p.size()) return 0;
  std::size_t best = brute_matching(p, r, k, sim, i + 1, used);
  for (std::size_t j = 0; j < r.size(); ++j) {
    if ((*used)[j] || sim.score(p[i], r[j]) < k) continue;
    (*used)[j] = 1;
    best = std::max(best, 1 + brute_matching(p, r, k, sim, i + 1, used));
    (*used)[j] = 0;
  }
  return best;
}

TableSimilarity random_table(const std::vector<std::string>& words, Rng& rng) {
  TableSimilarity t;
  for (std::size_t a = 0; a < words.size(); ++a) {
    for (std::size_t b = a + 1; b < words.size(); ++b) {
      if (rng.uniform() < 0.4) t.set(words[a], words[b], std::round(rng.uniform() * 10) / 10);
    }
  }
  return t;
}

}  // namespace

TEST_CASE("IoU examples") {
  ExactSimilarity exact;
  CHECK(attribute_iou({"a", "b"}, {"b", "c"}, 1.0, exact) == doctest::Approx(1.0 / 3));
  CHECK(attribute_iou({}, {}, 0.7, exact) == 1.0);
  CHECK(attribute_iou({"a"}, {}, 0.7, exact) == 0.0);
  CHECK(attribute_iou({}, {"a"}, 0.7, exact) == 0.0);
  CHECK_THROWS_AS(attribute_iou({"a"}, {"a"}, 0.0, exact), ArgumentError);
  CHECK_THROWS_AS(attribute_iou({"a"}, {"a"}, 1.5, exact), ArgumentError);

  TableSimilarity t;
  t.set("knee bend", "bent knees", 0.8);
  CHECK(attribute_iou({"knee bend"}, {"bent knees"}, 0.7, t) == 1.0);
  CHECK(attribute_iou({"knee bend"}, {"bent knees"}, 0.9, t) == 0.0);
  // One predicted phrase cannot cover two references.
  t.set("knee bend", "knee angle", 0.9);
  CHECK(attribute_iou({"knee bend"}, {"bent knees", "knee angle"}, 0.7, t) == doctest::Approx(0.5));
  CHECK_THROWS_AS(t.set("x", "y", 1.2), ArgumentError);
}

TEST_CASE("exact similarity reduces IoU to Jaccard") {
  Rng rng(10);
  ExactSimilarity exact;
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = testing::random_attribute_set(rng, 5);
    const auto r = testing::random_attribute_set(rng, 5);
    std::vector<std::string> inter, uni;
    std::set_intersection(p.begin(), p.end(), r.begin(), r.end(), std::back_inserter(inter));
    std::set_union(p.begin(), p.end(), r.begin(), r.end(), std::back_inserter(uni));
    const double jaccard = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    CHECK(attribute_iou(p, r, 1.0, exact) == doctest::Approx(jaccard));
  }
}

TEST_CASE("matching agrees with exhaustive search; IoU is bounded, symmetric and monotone") {
  Rng rng(11);
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f", "g"};
  for (int trial = 0; trial < 300; ++trial) {
    const auto sim = random_table(words, rng);
    AttributeSet p, r;
    for (const auto& w : words) {
      if (rng.uniform() < 0.4) p.insert(w);
      if (rng.uniform() < 0.4) r.insert(w);
    }
    const std::vector<std::string> pv(p.begin(), p.end()), rv(r.begin(), r.end());
    double prev = -1.0;
    for (double k : {1.0, 0.9, 0.7, 0.5, 0.3, 0.1}) {
      CHECK(max_matching(pv, rv, k, sim) == brute_matching(pv, rv, k, sim));
      const double v = attribute_iou(p, r, k, sim);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v == attribute_iou(r, p, k, sim));
      CHECK(v >= prev);
      prev = v;
    }
    CHECK(attribute_iou(p, p, 1.0, sim) == 1.0);
  }
}

TEST_CASE("corpus IoU") {
  ExactSimilarity exact;
  const std::map<std::string, AttributeSet> refs{{"x", {"a"}}, {"y", {"b", "c"}}};
  CHECK(corpus_iou_at_k({{"x", {"a"}}}, refs, 0.7, exact) == doctest::Approx(50.0));
  CHECK(corpus_iou_at_k({{"x", {"a"}}, {"y", {"c"}}}, refs, 0.7, exact) == doctest::Approx(75.0));
  CHECK_THROWS_AS(corpus_iou_at_k({{"z", {"a"}}}, refs, 0.7, exact), ArgumentError);
}

TEST_CASE("replay similarity") {
  testing::TempDir dir("sim");
  {
    std::ofstream f(dir.path() / "sim.jsonl");
    f << R"({"a": "knee bend", "b": "bent knees", "score": 0.75})" << "\n";
  }
  const auto sim = make_similarity("replay:" + (dir.path() / "sim.jsonl").string());
  CHECK(sim->score("bent knees", "knee bend") == 0.75);
  CHECK(sim->score("Knee Bend", "knee bend") == 1.0);
  CHECK_THROWS_AS(sim->score("knee bend", "elbow"), BackendError);
  CHECK(sim->backend_id().rfind("replay:", 0) == 0);
  CHECK(make_similarity("exact")->backend_id() == "exact");
  CHECK_THROWS_AS(make_similarity("cosine"), ConfigError);
}

TEST_CASE("proficiency accuracy and confusion") {
  const std::vector<Proficiency> labels{Proficiency::kNovice, Proficiency::kNovice, Proficiency::kLateExpert,
                                        Proficiency::kIntermediate};
  const std::vector<Proficiency> preds{Proficiency::kNovice, Proficiency::kLateExpert, Proficiency::kLateExpert,
                                       Proficiency::kEarlyExpert};
  CHECK(proficiency_accuracy(preds, labels) == doctest::Approx(50.0));
  const auto cm = confusion_matrix(preds, labels);
  CHECK(cm[0][0] == 1);
  CHECK(cm[0][3] == 1);
  CHECK(cm[3][3] == 1);
  CHECK(cm[1][2] == 1);
  std::size_t total = 0;
  for (const auto& row : cm) {
    for (auto v : row) total += v;
  }
  CHECK(total == 4);
  CHECK_THROWS_AS(proficiency_accuracy(preds, {}), ArgumentError);

  SUBCASE("uniform random guesses over balanced labels score about 25") {
    Rng rng(12);
    std::vector<Proficiency> l, p;
    for (int i = 0; i < 20000; ++i) {
      l.push_back(kProficiencyOrder[static_cast<std::size_t>(i % 4)]);
      p.push_back(kProficiencyOrder[rng.below(4)]);
    }
    CHECK(std::abs(proficiency_accuracy(p, l) - 25.0) < 2.0);
  }
}

TEST_CASE("relative drop and transfer matrix") {
  const auto d = relative_drop({{"FS", 80.0}, {"ZS1", 60.0}, {"ZS3", 88.0}});
  CHECK(d.at("FS") == 0.0);
  CHECK(d.at("ZS1") == doctest::Approx(25.0));
  CHECK(d.at("ZS3") == doctest::Approx(-10.0));
  CHECK_THROWS_AS(relative_drop({{"ZS1", 1.0}}), ArgumentError);
  CHECK_THROWS_AS(relative_drop({{"FS", 0.0}, {"ZS1", 1.0}}), ArgumentError);

  std::map<std::pair<std::string, std::string>, double> grid;
  for (const char* a : {"soccer", "basketball", "dance"}) {
    for (const char* b : {"soccer", "basketball", "dance"}) grid[{a, b}] = a == std::string(b) ? 1.0 : 0.5;
  }
  const auto m = transfer_matrix(grid, {"soccer", "basketball", "dance"});
  CHECK(m.labels == std::vector<std::string>{"soccer", "basketball", "dance"});
  CHECK(m.values(1, 1) == 1.0);
  CHECK(m.values(0, 2) == 0.5);
  CHECK(transfer_matrix(grid).labels == std::vector<std::string>{"basketball", "dance", "soccer"});
  grid.erase({"dance", "soccer"});
  try {
    transfer_matrix(grid, {"soccer", "basketball", "dance"});
    FAIL("expected CompletenessError");
  } catch (const CompletenessError& e) {
    CHECK(std::string(e.what()).find("train dance, test soccer") != std::string::npos);
  }
}

TEST_CASE("predictions I/O") {
  Prediction p{"clip:1", AttributeSet{"timing"}, std::string("keep, \"low\""), Proficiency::kEarlyExpert};
  const auto back = prediction_from_json(to_json(p));
  CHECK(back.sample_id == p.sample_id);
  CHECK(back.attributes == p.attributes);
  CHECK(back.feedback == p.feedback);
  CHECK(back.proficiency == p.proficiency);

  testing::TempDir dir("pred");
  {
    std::ofstream f(dir.path() / "p.jsonl");
    f << serialize_predictions({p}) << serialize_predictions({p});
  }
  CHECK_THROWS_AS(load_predictions(dir.path() / "p.jsonl"), DuplicationError);
  {
    std::ofstream f(dir.path() / "q.jsonl");
    f << R"({"sample_id": "a", "proficiency": "grandmaster"})" << "\n";
  }
  try {
    load_predictions(dir.path() / "q.jsonl");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "proficiency");
    CHECK(e.line() == 1);
  }
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("evaluation report") {
  auto a = testing::make_sample("clip:a", "v1", "soccer", "dribbling", {"balance", "timing"});
  a.feedback_text = "keep your balance and improve timing";
  a.proficiency = Proficiency::kNovice;
  auto b = testing::make_sample("clip:b", "v2", "soccer", "dribbling", {"footwork"});
  b.feedback_text = "use quicker footwork";
  b.proficiency = Proficiency::kIntermediate;
  const std::vector<Prediction> preds{
      {"clip:a", AttributeSet{"balance"}, std::string("keep your balance and improve timing"), Proficiency::kNovice},
      {"clip:b", AttributeSet{"footwork"}, std::string("stand tall"), Proficiency::kNovice}};
  const auto r = evaluate_predictions({a, b}, preds, "hash", "FS");
  CHECK(r.metrics.at("iou@0.70") == doctest::Approx(75.0));
  CHECK(r.metrics.at("iou@1.00") == doctest::Approx(75.0));
  CHECK(r.metrics.at("proficiency_accuracy") == doctest::Approx(50.0));
  CHECK(r.metrics.at("attribute_mention_rate") == doctest::Approx(50.0));
  CHECK(r.metrics.at("attribute_recall") == doctest::Approx(200.0 / 3));
  CHECK(r.metrics.at("rouge_l") == doctest::Approx(50.0));
  CHECK(r.samples.size() == 2);
  CHECK(r.counts.at("test_samples") == 2);

  testing::TempDir dir("report");
  write_eval_report(dir.path(), r);
  const auto first = read_file(dir.path() / "report.json");
  const auto csv = read_file(dir.path() / "per_sample.csv");
  CHECK(csv.find("clip:a") != std::string::npos);
  const auto back = load_eval_report(dir.path() / "report.json");
  CHECK(back.setting == "FS");
  CHECK(back.metrics.at("iou@0.70") == doctest::Approx(75.0));
  write_eval_report(dir.path(), back);
  CHECK(read_file(dir.path() / "report.json") == first);
  CHECK(first.find(dir.path().string()) == std::string::npos);

  CHECK_THROWS_AS(evaluate_predictions({a}, preds, "hash", "FS"), ArgumentError);
  CHECK_THROWS_AS(evaluate_predictions({}, {}, "hash", "FS"), ArgumentError);

  ReplayScorer scorer;
  scorer.add("meteor", "stand tall", "use quicker footwork", 12.5);
  EvalOptions opts;
  opts.external_scorer = &scorer;
  CHECK_THROWS_AS(evaluate_predictions({a, b}, preds, "hash", "FS", opts), BackendError);
  scorer.add("bert", "stand tall", "use quicker footwork", 40.0);
  scorer.add("meteor", a.feedback_text, a.feedback_text, 99.0);
  scorer.add("bert", a.feedback_text, a.feedback_text, 100.0);
  const auto ext = evaluate_predictions({a, b}, preds, "hash", "FS", opts);
  CHECK(ext.metrics.at("meteor_like") == doctest::Approx((99.0 + 12.5) / 2));
  CHECK(ext.metrics.at("bert_like") == doctest::Approx(70.0));
}
