// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Desk-scale stand-in corpus: templated commentary with planted attributes,
// the matching extraction rules and the events the synthetic encoder renders.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "skillassess/commentary.hpp"
#include "skillassess/extraction.hpp"
#include "skillassess/features.hpp"

namespace skillassess {

struct SyntheticSkillSpec {
  std::string name;
  std::vector<std::string> attributes;  // skill-specific, added to the sport pool
};

struct SyntheticSportSpec {
  std::string name;
  std::vector<std::string> common_attributes;
  std::vector<SyntheticSkillSpec> skills;
};

struct SyntheticCorpusSpec {
  std::vector<SyntheticSportSpec> sports;
  std::vector<std::string> views{"ego", "exo"};
  std::size_t samples_per_skill = 25;
  std::size_t events_per_video = 2;
  std::size_t min_attributes = 1;
  std::size_t max_attributes = 2;
  // Chance that a record also praises one attribute outside its incorrect set.
  double praise_probability = 0.5;
  double signal_strength = 1.0;
  std::size_t feature_dim = 16;
  std::uint64_t seed = 0;
};

// Throws SpecError for a degenerate spec (no sports, a sport without
// skills, an empty attribute pool, zero samples, bad ranges).
void validate(const SyntheticCorpusSpec& spec);
nlohmann::json to_json(const SyntheticCorpusSpec& spec);
SyntheticCorpusSpec synthetic_spec_from_json(const nlohmann::json& j);

// n_sports x n_skills layout over a fixed attribute bank. Each sport has
// four common attributes and each skill one specific attribute; `overlap`
// is the fraction of sport 0's common attributes every other sport reuses
// and the fraction of skill slots whose specific attribute is shared across
// sports.
SyntheticCorpusSpec make_overlap_spec(std::size_t n_sports, std::size_t n_skills, std::size_t samples_per_skill,
                                      double overlap, std::uint64_t seed);

struct SyntheticCorpus {
  std::vector<CommentaryRecord> records;
  std::vector<SkillAttributeAnnotation> ledger;
  std::vector<MockRule> rules;
  std::vector<PlantedEvent> events;
  SyntheticEncoderOptions encoder;
};

SyntheticCorpus gen_synthetic_corpus(const SyntheticCorpusSpec& spec);

// commentary.jsonl, ledger.jsonl, mock_rules.json, encoder.json, spec.json.
void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpusSpec& spec,
                            const SyntheticCorpus& corpus);

nlohmann::json encoder_to_json(const SyntheticEncoderOptions& options, const std::vector<PlantedEvent>& events);
std::unique_ptr<SyntheticEncoder> load_synthetic_encoder(const std::filesystem::path& path);

}  // namespace skillassess
