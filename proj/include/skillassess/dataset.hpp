// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Windowed clip samples and the four train/test protocols.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "skillassess/commentary.hpp"
#include "skillassess/common.hpp"
#include "skillassess/extraction.hpp"

namespace skillassess {

inline constexpr double kDefaultMu1 = 4.0;
inline constexpr double kDefaultMu2 = 4.0;

struct ClipSample {
  std::string sample_id;
  std::string video_id;
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  double video_duration_s = 0.0;
  std::string sport;
  std::string skill;
  std::vector<std::string> views;
  AttributeSet attributes;  // the incorrect set S
  std::string feedback_text;
  std::optional<Proficiency> proficiency;
  std::set<std::string> split_tags;

  friend bool operator==(const ClipSample&, const ClipSample&) = default;
};

nlohmann::json to_json(const ClipSample& s);
ClipSample sample_from_json(const nlohmann::json& j);
std::vector<ClipSample> load_samples(const std::filesystem::path& path);
std::string serialize_samples(const std::vector<ClipSample>& samples);

struct Window {
  double start_s;
  double end_s;
};

// [t - mu1, t + mu2] clamped to the video. Throws DegenerateWindowError when
// the clamped window is empty, ArgumentError on bad margins.
Window window_clip(double timestamp_s, double mu1, double mu2, double video_duration_s);

// Joins records with annotations. Samples with empty incorrect sets are
// dropped unless `keep_empty` (proficiency probing keeps them).
std::vector<ClipSample> build_samples(const std::vector<CommentaryRecord>& records,
                                      const std::vector<SkillAttributeAnnotation>& annotations,
                                      double mu1 = kDefaultMu1, double mu2 = kDefaultMu2,
                                      bool keep_empty = false);

enum class SplitMode { kFS, kZS1, kZS2, kZS3 };

std::string_view to_string(SplitMode m);
// Accepts "fs", "zs1", "zs-1", upper or lower case.
SplitMode parse_split_mode(std::string_view s);

inline constexpr std::array<SplitMode, 4> kAllSplitModes{SplitMode::kFS, SplitMode::kZS1,
                                                         SplitMode::kZS2, SplitMode::kZS3};

struct SplitSpec {
  SplitMode mode = SplitMode::kFS;
  std::optional<std::string> target_skill;
  std::optional<std::string> target_sport;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

void validate(const SplitSpec& spec);
nlohmann::json to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const nlohmann::json& j);

struct SplitResult {
  std::vector<ClipSample> train;
  std::vector<ClipSample> test;
  std::vector<std::string> warnings;
};

SplitResult make_split(const std::vector<ClipSample>& samples, const SplitSpec& spec);

// Portable split record: spec, member ids and a content hash over both.
struct SplitManifest {
  SplitSpec spec;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::string content_hash;
};

SplitManifest make_split_manifest(const SplitSpec& spec, const SplitResult& split);
nlohmann::json to_json(const SplitManifest& m);
SplitManifest split_manifest_from_json(const nlohmann::json& j);
// Throws ValidationError if the stored hash does not match the content.
void verify(const SplitManifest& m);

using SkillGrouping = std::map<std::string, std::string>;

// Exercise buckets for the single-sport fitness corpus, grouped by
// similarity in execution and effect.
const SkillGrouping& fitness_skill_groups();
SkillGrouping load_skill_grouping(const std::filesystem::path& path);

std::vector<ClipSample> map_skill_groups(std::vector<ClipSample> samples,
                                         const SkillGrouping& grouping, bool strict = true);

}  // namespace skillassess
