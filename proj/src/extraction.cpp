// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/extraction.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

#include "httplib.h"
#include "skillassess/error.hpp"

namespace skillassess {

namespace {

constexpr std::string_view kSystemPrompt =
    "Answer the question regarding a commentary about a sports drill. Do not add information "
    "not present in the question.";

constexpr std::string_view kUserPrefix = "The transcript of an expert commentating on a ";
constexpr std::string_view kUserMiddle =
    " drill is given below. List down the concepts that are correct and incorrect in the drill, "
    "as noted by the expert. The concepts are distinct aspects of the skill, e.g., control, body "
    "positioning, speed, body movement, hand position, and so on. Feel free to come up with newer "
    "concepts and write the response in two lines. The first line should contain the correctly "
    "shown concepts, and the second line should contain the incorrectly shown concepts. It should "
    "be in this format.\n\n"
    "Correct - comma separated concepts.\n\n"
    "Incorrect - comma separated concepts.\n\n"
    "Here is the expert feedback:\n\n";

bool is_terminal_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case ';':
    case ':':
    case '!':
    case '?':
      return true;
    default:
      return false;
  }
}

// Whole-word lowercase tokens (letters, digits, apostrophes).
std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'' || u >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool contains_phrase(const std::vector<std::string>& words, const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > words.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < phrase.size() && ok; ++j) ok = words[i + j] == phrase[j];
    if (ok) return true;
  }
  return false;
}

// Remainder of a "<keyword> - ..." line, or nullopt if `line` is not one.
std::optional<std::string> keyword_remainder(std::string_view line, std::string_view keyword) {
  std::string t = trim(line);
  if (!starts_with_ci(t, keyword)) return std::nullopt;
  std::string_view rest = std::string_view(t).substr(keyword.size());
  std::size_t i = 0;
  while (i < rest.size() && std::isspace(static_cast<unsigned char>(rest[i]))) ++i;
  if (i >= rest.size() || (rest[i] != '-' && rest[i] != ':')) return std::nullopt;
  return std::string(rest.substr(i + 1));
}

AttributeSet parse_item_list(std::string_view remainder) {
  AttributeSet out;
  for (const auto& item : split(remainder, ',')) {
    auto n = normalize_attribute(item);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

AttributeSet attribute_set_from_json(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw ValidationError(field, "expected array of strings");
  }
  AttributeSet out;
  for (const auto& v : j.at(field)) out.insert(v.get<std::string>());
  return out;
}

}  // namespace

nlohmann::json to_json(const SkillAttributeAnnotation& a) {
  return nlohmann::json{{"record_id", a.record_id},
                        {"correct_attributes", a.correct_attributes},
                        {"incorrect_attributes", a.incorrect_attributes},
                        {"backend_id", a.backend_id},
                        {"prompt_hash", a.prompt_hash}};
}

SkillAttributeAnnotation annotation_from_json(const nlohmann::json& j) {
  SkillAttributeAnnotation a;
  a.record_id = j.at("record_id").get<std::string>();
  a.correct_attributes = attribute_set_from_json(j, "correct_attributes");
  a.incorrect_attributes = attribute_set_from_json(j, "incorrect_attributes");
  a.backend_id = j.value("backend_id", "");
  a.prompt_hash = j.value("prompt_hash", "");
  return a;
}

std::vector<SkillAttributeAnnotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open annotations: " + path.string());
  std::vector<SkillAttributeAnnotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(annotation_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

std::string serialize_annotations(const std::vector<SkillAttributeAnnotation>& annotations) {
  std::string out;
  for (const auto& a : annotations) {
    out += to_json(a).dump();
    out += '\n';
  }
  return out;
}

std::string normalize_attribute(std::string_view raw) {
  std::string collapsed;
  collapsed.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !collapsed.empty();
      continue;
    }
    if (pending_space) collapsed.push_back(' ');
    pending_space = false;
    collapsed.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  // Stripping punctuation can expose trailing whitespace and vice versa.
  while (!collapsed.empty()) {
    const char last = collapsed.back();
    if (is_terminal_punct(last) || last == ' ') {
      collapsed.pop_back();
    } else {
      break;
    }
  }
  return collapsed;
}

bool is_canonical_attribute(std::string_view s) {
  if (s.empty()) return false;
  if (s.find_first_of(",;\n") != std::string_view::npos) return false;
  return normalize_attribute(s) == s;
}

Prompt build_extraction_prompt(std::string_view sport, std::string_view commentary) {
  if (sport.empty()) throw ArgumentError("build_extraction_prompt: sport must be non-empty");
  if (commentary.empty()) throw ArgumentError("build_extraction_prompt: commentary must be non-empty");
  Prompt p;
  p.system = std::string(kSystemPrompt);
  p.user.reserve(kUserPrefix.size() + sport.size() + kUserMiddle.size() + commentary.size());
  p.user.append(kUserPrefix).append(sport).append(kUserMiddle).append(commentary);
  return p;
}

std::string prompt_hash(const Prompt& p) { return ReplayBackend::key(p.system, p.user); }

ExtractedAttributes parse_extraction_response(std::string_view text) {
  std::optional<std::string> correct, incorrect;
  for (const auto& line : split(text, '\n')) {
    // "Incorrect" is tested first: "Correct" is not a prefix of it, but the
    // order keeps the intent obvious.
    if (!incorrect) {
      if (auto r = keyword_remainder(line, "incorrect")) {
        incorrect = std::move(r);
        continue;
      }
    }
    if (!correct) {
      if (auto r = keyword_remainder(line, "correct")) correct = std::move(r);
    }
  }
  if (!correct) throw FormatError("extraction response has no 'Correct -' line", std::string(text));
  if (!incorrect) throw FormatError("extraction response has no 'Incorrect -' line", std::string(text));
  return {parse_item_list(*correct), parse_item_list(*incorrect)};
}

std::string render_extraction_response(const AttributeSet& correct, const AttributeSet& incorrect) {
  const std::vector<std::string> c(correct.begin(), correct.end());
  const std::vector<std::string> i(incorrect.begin(), incorrect.end());
  return "Correct - " + join(c, ", ") + "\nIncorrect - " + join(i, ", ");
}

std::vector<MockRule> load_mock_rules(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  std::vector<MockRule> rules;
  for (const auto& r : j.at("rules")) {
    rules.push_back({r.at("cue").get<std::string>(), r.at("attribute").get<std::string>(),
                     r.at("polarity").get<std::string>() == "incorrect"});
  }
  return rules;
}

nlohmann::json to_json(const std::vector<MockRule>& rules) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rules) {
    arr.push_back({{"cue", r.cue},
                   {"attribute", r.attribute},
                   {"polarity", r.incorrect ? "incorrect" : "correct"}});
  }
  return nlohmann::json{{"rules", arr}};
}

RuleBasedMockBackend::RuleBasedMockBackend(std::vector<MockRule> rules) : rules_(std::move(rules)) {
  std::string digest;
  for (const auto& r : rules_) {
    digest += r.cue + '\x1f' + r.attribute + '\x1f' + (r.incorrect ? "1" : "0") + '\x1e';
  }
  id_ = "mock:" + sha256_hex(digest).substr(0, 16);
}

std::string RuleBasedMockBackend::complete(const std::string&, const std::string& user_prompt) {
  constexpr std::string_view kMarker = "Here is the expert feedback:\n\n";
  const auto pos = user_prompt.find(kMarker);
  const std::string_view commentary =
      pos == std::string::npos ? std::string_view(user_prompt)
                               : std::string_view(user_prompt).substr(pos + kMarker.size());
  const auto words = words_of(commentary);
  AttributeSet correct, incorrect;
  for (const auto& rule : rules_) {
    if (contains_phrase(words, words_of(rule.cue))) {
      (rule.incorrect ? incorrect : correct).insert(normalize_attribute(rule.attribute));
    }
  }
  return render_extraction_response(correct, incorrect);
}

std::string RuleBasedMockBackend::backend_id() const { return id_; }

ReplayBackend::ReplayBackend(std::map<std::string, std::string> cache, std::string id)
    : cache_(std::move(cache)), id_(std::move(id)) {}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open replay cache: " + path.string());
  std::map<std::string, std::string> cache;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      cache[j.at("key").get<std::string>()] = j.at("response").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return ReplayBackend(std::move(cache), "replay:" + sha256_file(path).substr(0, 16));
}

std::string ReplayBackend::key(std::string_view system_prompt, std::string_view user_prompt) {
  std::string buf;
  buf.reserve(system_prompt.size() + user_prompt.size());
  buf.append(system_prompt).append(user_prompt);
  return sha256_hex(buf);
}

std::string ReplayBackend::complete(const std::string& system_prompt,
                                    const std::string& user_prompt) {
  auto it = cache_.find(key(system_prompt, user_prompt));
  if (it == cache_.end()) throw BackendError("replay cache miss");
  return it->second;
}

HttpBackend::HttpBackend(std::string url, std::string key) : url_(std::move(url)), key_(std::move(key)) {
  if (url_.rfind("http://", 0) != 0) throw ConfigError("EXTRACTOR_URL must start with http://");
}

HttpBackend HttpBackend::from_environment() {
  const char* url = std::getenv("EXTRACTOR_URL");
  const char* key = std::getenv("EXTRACTOR_KEY");
  if (!url || !*url) throw ConfigError("EXTRACTOR_URL is not set");
  return HttpBackend(url, key ? key : "");
}

std::string HttpBackend::complete(const std::string& system_prompt, const std::string& user_prompt) {
  // Split "http://host:port/path" into origin and path.
  const auto path_pos = url_.find('/', std::string_view("http://").size());
  const std::string origin = path_pos == std::string::npos ? url_ : url_.substr(0, path_pos);
  const std::string path = path_pos == std::string::npos ? "/" : url_.substr(path_pos);
  httplib::Client client(origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  httplib::Headers headers;
  if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
  const nlohmann::json body{{"system", system_prompt}, {"user", user_prompt}};
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw BackendError("http backend: " + httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError("http backend: status " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body).at("completion").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("http backend: bad response body: ") + e.what());
  }
}

ExtractionResult extract_annotations(const std::vector<CommentaryRecord>& records,
                                     CompletionBackend& backend, int retries, std::size_t threads) {
  if (retries < 0) throw ArgumentError("extract_annotations: retries must be >= 0");
  struct Outcome {
    std::optional<SkillAttributeAnnotation> annotation;
    std::string reason;
  };
  std::vector<Outcome> outcomes(records.size());
  std::mutex backend_mu;
  const bool serial = !backend.thread_safe();
  const std::string backend_id = backend.backend_id();

  auto process = [&](std::size_t i) {
    const auto& rec = records[i];
    const Prompt prompt = build_extraction_prompt(rec.sport, rec.text);
    std::string reason;
    for (int attempt = 0; attempt <= retries; ++attempt) {
      try {
        std::string response;
        if (serial) {
          std::lock_guard lock(backend_mu);
          response = backend.complete(prompt.system, prompt.user);
        } else {
          response = backend.complete(prompt.system, prompt.user);
        }
        auto parsed = parse_extraction_response(response);
        outcomes[i].annotation = SkillAttributeAnnotation{rec.record_id, std::move(parsed.correct),
                                                          std::move(parsed.incorrect), backend_id,
                                                          prompt_hash(prompt)};
        return;
      } catch (const FormatError&) {
        reason = "format error";
      } catch (const BackendError& e) {
        reason = std::string("backend error: ") + e.what();
      }
    }
    outcomes[i].reason = reason;
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, records.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
          try {
            process(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ExtractionResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (outcomes[i].annotation) {
      result.annotations.push_back(std::move(*outcomes[i].annotation));
    } else {
      result.skipped.push_back({records[i].record_id, outcomes[i].reason});
    }
  }
  return result;
}

AttributeVocabulary attribute_vocabulary(const std::vector<SkillAttributeAnnotation>& annotations) {
  AttributeVocabulary v;
  for (const auto& a : annotations) {
    for (const auto& s : a.incorrect_attributes) ++v.incorrect[s];
    for (const auto& s : a.correct_attributes) ++v.correct[s];
  }
  return v;
}

}  // namespace skillassess
