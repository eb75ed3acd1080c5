// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/commentary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "skillassess/common.hpp"
#include "skillassess/error.hpp"

namespace skillassess {

namespace {

constexpr std::array<std::string_view, 4> kProficiencyNames{"novice", "intermediate",
                                                            "early_expert", "late_expert"};

constexpr std::array<std::string_view, 9> kKnownFields{
    "record_id", "video_id", "timestamp_s", "text",          "sport",
    "skill",     "views",    "proficiency", "video_duration_s"};

bool is_known_field(std::string_view key) {
  return std::find(kKnownFields.begin(), kKnownFields.end(), key) != kKnownFields.end();
}

std::string require_string(const nlohmann::json& j, const char* field, std::size_t line,
                           bool allow_missing = false) {
  auto it = j.find(field);
  if (it == j.end()) {
    if (allow_missing) return {};
    throw ValidationError(field, "missing", line);
  }
  if (!it->is_string()) throw ValidationError(field, "expected string", line);
  return it->get<std::string>();
}

double require_number(const nlohmann::json& j, const char* field, std::size_t line) {
  auto it = j.find(field);
  if (it == j.end()) throw ValidationError(field, "missing", line);
  if (!it->is_number()) throw ValidationError(field, "expected number", line);
  return it->get<double>();
}

std::size_t word_count(std::string_view text) {
  std::istringstream ss{std::string(text)};
  std::size_t n = 0;
  std::string w;
  while (ss >> w) ++n;
  return n;
}

}  // namespace

std::string_view to_string(Proficiency p) { return kProficiencyNames[static_cast<int>(p)]; }

std::optional<Proficiency> parse_proficiency(std::string_view s) {
  for (std::size_t i = 0; i < kProficiencyNames.size(); ++i) {
    if (kProficiencyNames[i] == s) return static_cast<Proficiency>(i);
  }
  return std::nullopt;
}

void validate(const CommentaryRecord& r, std::size_t line) {
  if (r.record_id.empty()) throw ValidationError("record_id", "must be non-empty", line);
  if (r.video_id.empty()) throw ValidationError("video_id", "must be non-empty", line);
  if (r.text.empty()) throw ValidationError("text", "must be non-empty", line);
  if (r.sport.empty()) throw ValidationError("sport", "must be non-empty", line);
  if (!std::isfinite(r.video_duration_s) || r.video_duration_s <= 0.0) {
    throw ValidationError("video_duration_s", "must be positive", line);
  }
  if (!std::isfinite(r.timestamp_s) || r.timestamp_s < 0.0) {
    throw ValidationError("timestamp_s", "must be non-negative", line);
  }
  if (r.timestamp_s > r.video_duration_s) {
    throw ValidationError("timestamp_s", "exceeds video_duration_s", line);
  }
  if (r.views.empty()) throw ValidationError("views", "must contain at least one view", line);
  std::set<std::string> seen;
  for (const auto& v : r.views) {
    if (v.empty()) throw ValidationError("views", "empty view id", line);
    if (!seen.insert(v).second) throw ValidationError("views", "duplicate view '" + v + "'", line);
  }
}

nlohmann::json to_json(const CommentaryRecord& r) {
  nlohmann::json j = r.extra.is_object() ? r.extra : nlohmann::json::object();
  j["record_id"] = r.record_id;
  j["video_id"] = r.video_id;
  j["timestamp_s"] = r.timestamp_s;
  j["text"] = r.text;
  j["sport"] = r.sport;
  j["skill"] = r.skill;
  j["views"] = r.views;
  j["proficiency"] = r.proficiency ? nlohmann::json(std::string(to_string(*r.proficiency)))
                                   : nlohmann::json(nullptr);
  j["video_duration_s"] = r.video_duration_s;
  return j;
}

CommentaryRecord record_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "record is not an object");
  CommentaryRecord r;
  r.record_id = require_string(j, "record_id", line);
  r.video_id = require_string(j, "video_id", line);
  r.timestamp_s = require_number(j, "timestamp_s", line);
  r.text = require_string(j, "text", line);
  r.sport = require_string(j, "sport", line);
  r.skill = require_string(j, "skill", line, /*allow_missing=*/true);
  auto views = j.find("views");
  if (views == j.end() || !views->is_array()) throw ValidationError("views", "expected array", line);
  for (const auto& v : *views) {
    if (!v.is_string()) throw ValidationError("views", "expected array of strings", line);
    r.views.push_back(v.get<std::string>());
  }
  if (auto p = j.find("proficiency"); p != j.end() && !p->is_null()) {
    if (!p->is_string()) throw ValidationError("proficiency", "expected string", line);
    r.proficiency = parse_proficiency(p->get<std::string>());
    if (!r.proficiency) {
      throw ValidationError("proficiency", "unknown class '" + p->get<std::string>() + "'", line);
    }
  }
  r.video_duration_s = require_number(j, "video_duration_s", line);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!is_known_field(it.key())) r.extra[it.key()] = it.value();
  }
  validate(r, line);
  return r;
}

std::vector<CommentaryRecord> parse_corpus(std::istream& in) {
  std::vector<CommentaryRecord> out;
  std::set<std::pair<std::string, double>> keys;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    auto rec = record_from_json(j, lineno);
    if (!keys.emplace(rec.video_id, rec.timestamp_s).second) {
      throw DuplicationError("line " + std::to_string(lineno) + ": duplicate (video_id, timestamp_s) = (" +
                             rec.video_id + ", " + std::to_string(rec.timestamp_s) + ")");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CommentaryRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus: " + path.string());
  return parse_corpus(in);
}

std::string serialize_corpus(const std::vector<CommentaryRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

StatsSummary corpus_statistics(const std::vector<CommentaryRecord>& records) {
  StatsSummary s;
  s.total_records = records.size();
  std::vector<std::size_t> lengths;
  for (const auto& r : records) {
    ++s.per_sport[r.sport];
    ++s.per_skill[r.sport + "/" + r.skill];
    ++s.per_proficiency[r.proficiency ? std::string(to_string(*r.proficiency)) : "unlabeled"];
    ++s.records_per_video[r.video_id];
    lengths.push_back(word_count(r.text));
  }
  s.total_videos = s.records_per_video.size();
  if (!lengths.empty()) {
    std::sort(lengths.begin(), lengths.end());
    s.commentary_length.min_words = lengths.front();
    s.commentary_length.max_words = lengths.back();
    double sum = 0.0;
    for (auto l : lengths) sum += static_cast<double>(l);
    s.commentary_length.mean_words = sum / static_cast<double>(lengths.size());
    const std::size_t n = lengths.size();
    s.commentary_length.median_words =
        n % 2 ? static_cast<double>(lengths[n / 2])
              : 0.5 * static_cast<double>(lengths[n / 2 - 1] + lengths[n / 2]);
  }
  return s;
}

nlohmann::json to_json(const StatsSummary& s) {
  return nlohmann::json{
      {"total_records", s.total_records},
      {"total_videos", s.total_videos},
      {"per_sport", s.per_sport},
      {"per_skill", s.per_skill},
      {"per_proficiency", s.per_proficiency},
      {"records_per_video", s.records_per_video},
      {"commentary_length",
       {{"min_words", s.commentary_length.min_words},
        {"max_words", s.commentary_length.max_words},
        {"mean_words", s.commentary_length.mean_words},
        {"median_words", s.commentary_length.median_words}}},
  };
}

}  // namespace skillassess
