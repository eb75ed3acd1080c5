// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Mining correct/incorrect skill-attribute sets from commentary by prompting
// a text-completion backend, then parsing the two-line response.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "skillassess/commentary.hpp"
#include "skillassess/common.hpp"

namespace skillassess {

struct SkillAttributeAnnotation {
  std::string record_id;
  AttributeSet correct_attributes;
  AttributeSet incorrect_attributes;
  std::string backend_id;
  std::string prompt_hash;

  friend bool operator==(const SkillAttributeAnnotation&, const SkillAttributeAnnotation&) = default;
};

nlohmann::json to_json(const SkillAttributeAnnotation& a);
SkillAttributeAnnotation annotation_from_json(const nlohmann::json& j);
std::vector<SkillAttributeAnnotation> load_annotations(const std::filesystem::path& path);
std::string serialize_annotations(const std::vector<SkillAttributeAnnotation>& annotations);

// Lowercases, collapses internal whitespace, trims and strips terminal
// punctuation. Idempotent. Returns "" when nothing is left.
std::string normalize_attribute(std::string_view raw);

// Canonical = normalize_attribute fixed point, non-empty, and free of the
// list delimiters (',', ';', newline).
bool is_canonical_attribute(std::string_view s);

struct Prompt {
  std::string system;
  std::string user;
};

Prompt build_extraction_prompt(std::string_view sport, std::string_view commentary);
std::string prompt_hash(const Prompt& p);

struct ExtractedAttributes {
  AttributeSet correct;
  AttributeSet incorrect;
};

// Throws FormatError when either the "Correct -" or "Incorrect -" line is absent.
ExtractedAttributes parse_extraction_response(std::string_view text);
// Inverse of parse_extraction_response on canonical sets.
std::string render_extraction_response(const AttributeSet& correct, const AttributeSet& incorrect);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  // Throws BackendError on transport failure.
  virtual std::string complete(const std::string& system_prompt, const std::string& user_prompt) = 0;
  virtual std::string backend_id() const = 0;
  // Backends returning false are called from one thread at a time.
  virtual bool thread_safe() const { return true; }
};

// Keyword rules over the commentary text. A rule fires when its cue occurs
// as a whole-word phrase (case-insensitive).
struct MockRule {
  std::string cue;
  std::string attribute;
  bool incorrect = true;
};

std::vector<MockRule> load_mock_rules(const std::filesystem::path& path);
nlohmann::json to_json(const std::vector<MockRule>& rules);

class RuleBasedMockBackend : public CompletionBackend {
 public:
  explicit RuleBasedMockBackend(std::vector<MockRule> rules);
  std::string complete(const std::string& system_prompt, const std::string& user_prompt) override;
  std::string backend_id() const override;

 private:
  std::vector<MockRule> rules_;
  std::string id_;
};

// Responses keyed by sha256(system_prompt + user_prompt); a cache miss is a
// transport failure.
class ReplayBackend : public CompletionBackend {
 public:
  explicit ReplayBackend(std::map<std::string, std::string> cache, std::string id = "replay");
  static ReplayBackend from_file(const std::filesystem::path& path);
  static std::string key(std::string_view system_prompt, std::string_view user_prompt);

  std::string complete(const std::string& system_prompt, const std::string& user_prompt) override;
  std::string backend_id() const override { return id_; }

 private:
  std::map<std::string, std::string> cache_;
  std::string id_;
};

// POSTs {"system": ..., "user": ...} as JSON to EXTRACTOR_URL with
// "Authorization: Bearer $EXTRACTOR_KEY" and expects {"completion": ...}.
// Plain http:// only.
class HttpBackend : public CompletionBackend {
 public:
  HttpBackend(std::string url, std::string key);
  static HttpBackend from_environment();

  std::string complete(const std::string& system_prompt, const std::string& user_prompt) override;
  std::string backend_id() const override { return "http:" + url_; }

 private:
  std::string url_;
  std::string key_;
};

struct SkippedRecord {
  std::string record_id;
  std::string reason;
};

struct ExtractionResult {
  std::vector<SkillAttributeAnnotation> annotations;
  std::vector<SkippedRecord> skipped;
};

ExtractionResult extract_annotations(const std::vector<CommentaryRecord>& records,
                                     CompletionBackend& backend, int retries,
                                     std::size_t threads = 1);

struct AttributeVocabulary {
  std::map<std::string, std::size_t> incorrect;
  std::map<std::string, std::size_t> correct;
};

AttributeVocabulary attribute_vocabulary(const std::vector<SkillAttributeAnnotation>& annotations);

}  // namespace skillassess
