// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Timestamped expert commentary: the raw supervision source.

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace skillassess {

enum class Proficiency { kNovice = 0, kIntermediate = 1, kEarlyExpert = 2, kLateExpert = 3 };

inline constexpr std::size_t kNumProficiencyClasses = 4;
inline constexpr std::array<Proficiency, kNumProficiencyClasses> kProficiencyOrder{
    Proficiency::kNovice, Proficiency::kIntermediate, Proficiency::kEarlyExpert,
    Proficiency::kLateExpert};

std::string_view to_string(Proficiency p);
// Accepts the canonical snake_case names. Returns nullopt otherwise.
std::optional<Proficiency> parse_proficiency(std::string_view s);

struct CommentaryRecord {
  std::string record_id;
  std::string video_id;
  double timestamp_s = 0.0;
  std::string text;
  std::string sport;
  std::string skill;  // may be empty for sports without skill subclasses
  std::vector<std::string> views;
  std::optional<Proficiency> proficiency;
  double video_duration_s = 0.0;
  // Unknown fields, kept verbatim for forward compatibility.
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const CommentaryRecord&, const CommentaryRecord&) = default;
};

// Throws ValidationError naming the first violated field.
void validate(const CommentaryRecord& record, std::size_t line = 0);

nlohmann::json to_json(const CommentaryRecord& record);
CommentaryRecord record_from_json(const nlohmann::json& j, std::size_t line = 0);

std::vector<CommentaryRecord> parse_corpus(std::istream& in);
std::vector<CommentaryRecord> load_corpus(const std::filesystem::path& path);
std::string serialize_corpus(const std::vector<CommentaryRecord>& records);

struct LengthDistribution {
  std::size_t min_words = 0;
  std::size_t max_words = 0;
  double mean_words = 0.0;
  double median_words = 0.0;
};

struct StatsSummary {
  std::size_t total_records = 0;
  std::size_t total_videos = 0;
  std::map<std::string, std::size_t> per_sport;
  // Keyed "sport/skill"; skill-less sports appear as "sport/".
  std::map<std::string, std::size_t> per_skill;
  // Includes "unlabeled" for records without a proficiency.
  std::map<std::string, std::size_t> per_proficiency;
  std::map<std::string, std::size_t> records_per_video;
  LengthDistribution commentary_length;
};

StatsSummary corpus_statistics(const std::vector<CommentaryRecord>& records);
nlohmann::json to_json(const StatsSummary& stats);

}  // namespace skillassess
