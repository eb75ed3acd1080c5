// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "doctest.h"
#include "skillassess/commentary.hpp"
#include "skillassess/error.hpp"
#include "skillassess/synthetic.hpp"
#include "test_util.hpp"

using namespace skillassess;
using testing::make_record;

namespace {

std::string line(const CommentaryRecord& r) { return to_json(r).dump() + "\n"; }

}  // namespace

TEST_CASE("load preserves order and round-trips") {
  std::vector<CommentaryRecord> recs{make_record("r1", "v1", 5, "Fix your balance."),
                                     make_record("r2", "v1", 9, "Good footwork."),
                                     make_record("r3", "v2", 3, "Work on timing.", "basketball", "")};
  recs[1].proficiency = Proficiency::kLateExpert;
  testing::TempDir dir("commentary");
  write_file_atomic(dir / "c.jsonl", serialize_corpus(recs));
  const auto loaded = load_corpus(dir / "c.jsonl");
  CHECK(loaded == recs);
  CHECK(serialize_corpus(loaded) == serialize_corpus(recs));
}

TEST_CASE("empty corpus loads as empty list") {
  std::istringstream in("");
  CHECK(parse_corpus(in).empty());
  std::istringstream blank("\n  \n");
  CHECK(parse_corpus(blank).empty());
}

TEST_CASE("negative timestamp names line and field") {
  auto bad = make_record("r2", "v1", 4, "x");
  auto j = to_json(bad);
  j["timestamp_s"] = -1;
  std::istringstream in(line(make_record("r1", "v1", 1, "x")) + j.dump() + "\n");
  try {
    parse_corpus(in);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.line() == 2);
    CHECK(e.field() == "timestamp_s");
  }
}

TEST_CASE("record invariants are enforced") {
  auto r = make_record("r", "v", 200, "x");
  CHECK_THROWS_AS(validate(r), ValidationError);  // beyond duration
  r = make_record("r", "v", 1, "x");
  r.views = {};
  CHECK_THROWS_AS(validate(r), ValidationError);
  r.views = {"ego", "ego"};
  CHECK_THROWS_AS(validate(r), ValidationError);
  r = make_record("r", "v", 1, "");
  CHECK_THROWS_AS(validate(r), ValidationError);
  r = make_record("r", "v", 1, "x");
  r.video_duration_s = 0;
  CHECK_THROWS_AS(validate(r), ValidationError);
}

TEST_CASE("malformed json line is a parse error with line number") {
  std::istringstream in(line(make_record("r1", "v1", 1, "x")) + "{not json\n");
  try {
    parse_corpus(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("unknown proficiency label is rejected") {
  auto j = to_json(make_record("r1", "v1", 1, "x"));
  j["proficiency"] = "grandmaster";
  std::istringstream in(j.dump() + "\n");
  CHECK_THROWS_AS(parse_corpus(in), ValidationError);
}

TEST_CASE("duplicate video and timestamp is rejected") {
  std::istringstream in(line(make_record("r1", "v1", 1, "x")) + line(make_record("r2", "v1", 1, "y")));
  CHECK_THROWS_AS(parse_corpus(in), DuplicationError);
}

TEST_CASE("unknown fields survive a round trip") {
  auto j = to_json(make_record("r1", "v1", 1, "x"));
  j["annotator"] = "expert-7";
  const auto r = record_from_json(j);
  CHECK(to_json(r).at("annotator") == "expert-7");
}

TEST_CASE("proficiency labels parse both ways") {
  for (auto p : kProficiencyOrder) CHECK(parse_proficiency(to_string(p)) == p);
  CHECK(to_string(Proficiency::kEarlyExpert) == "early_expert");
  CHECK_FALSE(parse_proficiency("expert").has_value());
}

TEST_CASE("statistics count per sport and partition the corpus") {
  std::vector<CommentaryRecord> recs;
  for (int i = 0; i < 6; ++i) recs.push_back(make_record("s" + std::to_string(i), "vs", i, "one two", "soccer"));
  for (int i = 0; i < 4; ++i) {
    recs.push_back(make_record("b" + std::to_string(i), "vb" + std::to_string(i), 1, "a b c d", "basketball"));
  }
  const auto s = corpus_statistics(recs);
  CHECK(s.total_records == 10);
  CHECK(s.per_sport.at("soccer") == 6);
  CHECK(s.per_sport.at("basketball") == 4);
  CHECK(s.total_videos == 5);
  CHECK(s.commentary_length.min_words == 2);
  CHECK(s.commentary_length.max_words == 4);
  CHECK(s.commentary_length.median_words == doctest::Approx(2.0));
  std::size_t sum = 0;
  for (const auto& [k, v] : s.per_proficiency) sum += v;
  CHECK(sum == 10);

  const auto empty = corpus_statistics({});
  CHECK(empty.total_records == 0);
  CHECK(empty.per_sport.empty());
}

TEST_CASE("statistics of a synthetic corpus match its declared composition") {
  const auto spec = make_overlap_spec(2, 3, 10, 0.5, 4);
  const auto corpus = gen_synthetic_corpus(spec);
  const auto s = corpus_statistics(corpus.records);
  CHECK(s.total_records == 2 * 3 * 10);
  CHECK(s.per_sport.size() == 2);
  for (const auto& [sport, n] : s.per_sport) CHECK(n == 30);
  CHECK(s.per_skill.size() == 6);
  for (const auto& [skill, n] : s.per_skill) CHECK(n == 10);
}
