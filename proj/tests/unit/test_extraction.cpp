// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "skillassess/error.hpp"
#include "skillassess/extraction.hpp"
#include "skillassess/synthetic.hpp"
#include "test_util.hpp"

using namespace skillassess;
using testing::make_record;

namespace {

class CannedBackend : public CompletionBackend {
 public:
  explicit CannedBackend(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  std::string complete(const std::string&, const std::string&) override {
    const auto i = calls_++;
    return responses_[std::min<std::size_t>(i, responses_.size() - 1)];
  }
  std::string backend_id() const override { return "canned"; }
  bool thread_safe() const override { return false; }
  std::size_t calls() const { return calls_; }

 private:
  std::vector<std::string> responses_;
  std::size_t calls_ = 0;
};

class FailingBackend : public CompletionBackend {
 public:
  std::string complete(const std::string&, const std::string&) override {
    ++calls;
    throw BackendError("connection refused");
  }
  std::string backend_id() const override { return "failing"; }
  std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("extraction prompt substitutes sport and ends with commentary") {
  const auto p = build_extraction_prompt("soccer", "Keep the ball close.");
  CHECK(p.user.find("commentating on a soccer drill") != std::string::npos);
  CHECK(p.user.size() >= 20);
  CHECK(p.user.substr(p.user.size() - 20) == "Keep the ball close.");
  CHECK(p.user.find("Correct - comma separated concepts.") != std::string::npos);
  CHECK(p.user.find("Incorrect - comma separated concepts.") != std::string::npos);
  CHECK(p.system.find("Do not add information not present in the question.") != std::string::npos);
  const auto q = build_extraction_prompt("soccer", "Keep the ball close.");
  CHECK(p.user == q.user);
  CHECK(p.system == q.system);
  CHECK(prompt_hash(p) == prompt_hash(q));
  CHECK_THROWS_AS(build_extraction_prompt("", "x"), ArgumentError);
  CHECK_THROWS_AS(build_extraction_prompt("soccer", ""), ArgumentError);
}

TEST_CASE("normalize_attribute examples and idempotence") {
  CHECK(normalize_attribute("  Foot  Positioning.") == "foot positioning");
  CHECK(normalize_attribute("control") == "control");
  CHECK(normalize_attribute("BALANCE,") == "balance");
  CHECK(normalize_attribute(" ... ") == "");
  Rng rng(5);
  const std::string alphabet = "aB .,;:!?\t\nxYz";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const auto len = rng.below(12);
    for (std::size_t k = 0; k < len; ++k) s.push_back(alphabet[rng.below(alphabet.size())]);
    const auto once = normalize_attribute(s);
    CHECK(normalize_attribute(once) == once);
  }
}

TEST_CASE("parse extraction response examples") {
  auto r = parse_extraction_response("Correct - Speed, Balance\nIncorrect - Foot Positioning, control");
  CHECK(r.correct == AttributeSet{"speed", "balance"});
  CHECK(r.incorrect == AttributeSet{"foot positioning", "control"});
  r = parse_extraction_response("Correct - \nIncorrect - control");
  CHECK(r.correct.empty());
  CHECK(r.incorrect == AttributeSet{"control"});
  r = parse_extraction_response("  correct -  a\n\n  INCORRECT -b , ,c.\n");
  CHECK(r.correct == AttributeSet{"a"});
  CHECK(r.incorrect == AttributeSet{"b", "c"});
  CHECK_THROWS_AS(parse_extraction_response("Incorrect - control"), FormatError);
  CHECK_THROWS_AS(parse_extraction_response("Correct - control"), FormatError);
  try {
    parse_extraction_response("garbage");
  } catch (const FormatError& e) {
    CHECK(e.raw_response() == "garbage");
  }
}

TEST_CASE("parse is a left inverse of render on canonical sets") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto c = testing::random_attribute_set(rng, 5);
    const auto w = testing::random_attribute_set(rng, 5);
    for (const auto& a : c) REQUIRE(is_canonical_attribute(a));
    const auto r = parse_extraction_response(render_extraction_response(c, w));
    CHECK(r.correct == c);
    CHECK(r.incorrect == w);
  }
}

TEST_CASE("extract with canned responses") {
  std::vector<CommentaryRecord> recs{make_record("r1", "v", 1, "a"), make_record("r2", "v", 2, "b")};
  CannedBackend ok({"Correct - x\nIncorrect - y"});
  auto res = extract_annotations(recs, ok, 0);
  REQUIRE(res.annotations.size() == 2);
  CHECK(res.skipped.empty());
  CHECK(res.annotations[0].record_id == "r1");
  CHECK(res.annotations[1].incorrect_attributes == AttributeSet{"y"});
  CHECK(res.annotations[0].backend_id == "canned");
  CHECK(res.annotations[0].prompt_hash == prompt_hash(build_extraction_prompt("soccer", "a")));
}

TEST_CASE("malformed output is retried then skipped") {
  std::vector<CommentaryRecord> recs{make_record("r1", "v", 1, "a")};
  CannedBackend bad({"nonsense"});
  auto res = extract_annotations(recs, bad, 2);
  CHECK(res.annotations.empty());
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0].reason == "format error");
  CHECK(bad.calls() == 3);

  CannedBackend recovers({"nonsense", "Correct - a\nIncorrect - b"});
  res = extract_annotations(recs, recovers, 1);
  CHECK(res.annotations.size() == 1);
  CHECK(res.skipped.empty());

  FailingBackend down;
  res = extract_annotations(recs, down, 1);
  CHECK(res.skipped.size() == 1);
  CHECK(res.skipped[0].reason.find("backend error") == 0);
  CHECK(down.calls == 2);
  CHECK_THROWS_AS(extract_annotations(recs, down, -1), ArgumentError);
}

TEST_CASE("mock backend recovers the planted ledger, in order, with any thread count") {
  const auto corpus = gen_synthetic_corpus(make_overlap_spec(2, 2, 15, 0.5, 3));
  RuleBasedMockBackend mock(corpus.rules);
  const auto serial = extract_annotations(corpus.records, mock, 0, 1);
  const auto parallel = extract_annotations(corpus.records, mock, 0, 4);
  CHECK(serial.annotations.size() + serial.skipped.size() == corpus.records.size());
  CHECK(serial.annotations == parallel.annotations);
  REQUIRE(serial.annotations.size() == corpus.ledger.size());
  for (std::size_t i = 0; i < corpus.ledger.size(); ++i) {
    CHECK(serial.annotations[i].record_id == corpus.ledger[i].record_id);
    CHECK(serial.annotations[i].incorrect_attributes == corpus.ledger[i].incorrect_attributes);
    CHECK(serial.annotations[i].correct_attributes == corpus.ledger[i].correct_attributes);
  }
}

TEST_CASE("mock rule matches whole words only") {
  RuleBasedMockBackend mock({{"slow", "speed", true}, {"nice balance", "balance", false}});
  const auto p = build_extraction_prompt("soccer", "You are slow here, but nice balance.");
  const auto r = parse_extraction_response(mock.complete(p.system, p.user));
  CHECK(r.incorrect == AttributeSet{"speed"});
  CHECK(r.correct == AttributeSet{"balance"});
  const auto q = build_extraction_prompt("soccer", "slowly now");
  CHECK(parse_extraction_response(mock.complete(q.system, q.user)).incorrect.empty());
}

TEST_CASE("replay backend serves recorded responses and misses loudly") {
  testing::TempDir dir("replay");
  const auto p = build_extraction_prompt("soccer", "slow");
  nlohmann::json entry{{"key", ReplayBackend::key(p.system, p.user)}, {"response", "Correct - \nIncorrect - speed"}};
  write_file_atomic(dir / "cache.jsonl", entry.dump() + "\n");
  auto replay = ReplayBackend::from_file(dir / "cache.jsonl");
  CHECK(replay.complete(p.system, p.user) == "Correct - \nIncorrect - speed");
  CHECK(replay.backend_id().rfind("replay:", 0) == 0);
  CHECK_THROWS_AS(replay.complete(p.system, "other"), BackendError);
  const auto res = extract_annotations({make_record("r1", "v", 1, "different")}, replay, 1);
  CHECK(res.skipped.size() == 1);
}

TEST_CASE("annotations serialize and reload") {
  std::vector<SkillAttributeAnnotation> a{{"r1", {"x"}, {"y", "z"}, "mock:1", "abc"}, {"r2", {}, {}, "mock:1", "def"}};
  testing::TempDir dir("ann");
  write_file_atomic(dir / "a.jsonl", serialize_annotations(a));
  CHECK(load_annotations(dir / "a.jsonl") == a);
}

TEST_CASE("attribute vocabulary counts occurrences") {
  std::vector<SkillAttributeAnnotation> a{{"r1", {"c"}, {"a", "b"}, "", ""}, {"r2", {}, {"a"}, "", ""}};
  const auto v = attribute_vocabulary(a);
  CHECK(v.incorrect == std::map<std::string, std::size_t>{{"a", 2}, {"b", 1}});
  CHECK(v.correct == std::map<std::string, std::size_t>{{"c", 1}});
  CHECK(attribute_vocabulary({}).incorrect.empty());
}

TEST_CASE("http backend posts prompts and reads the completion") {
  httplib::Server server;
  std::string seen_auth;
  server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    const bool has_fields = body.contains("system") && body.contains("user");
    res.set_content(nlohmann::json{{"completion", has_fields ? "Correct - a\nIncorrect - b" : ""}}.dump(),
                    "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string origin = "http://127.0.0.1:" + std::to_string(port);
  HttpBackend http(origin + "/v1/complete", "secret");
  const auto res = extract_annotations({make_record("r1", "v", 1, "x")}, http, 0);
  REQUIRE(res.annotations.size() == 1);
  CHECK(res.annotations[0].incorrect_attributes == AttributeSet{"b"});
  CHECK(seen_auth == "Bearer secret");

  HttpBackend broken(origin + "/broken", "");
  CHECK_THROWS_AS(broken.complete("s", "u"), BackendError);
  CHECK_THROWS_AS(HttpBackend("ftp://x", ""), ConfigError);

  server.stop();
  t.join();
}
