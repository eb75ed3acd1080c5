// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Glue shared by the command-line tool and the end-to-end tests: feature
// encoding into tables, dataset directories and batch inference.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "skillassess/evaluation.hpp"
#include "skillassess/features.hpp"
#include "skillassess/training.hpp"

namespace skillassess {

FeatureTable encode_features(const std::vector<ClipSample>& samples, const EncoderBackend& encoder);

// Dataset directory: samples.jsonl, features/ (FeatureCache) and
// dataset.json naming the encoder backend and feature width.
struct DatasetInfo {
  std::string encoder_backend_id;
  std::size_t feature_dim = 0;
  std::size_t sample_count = 0;
};

void write_dataset(const std::filesystem::path& dir, const std::vector<ClipSample>& samples,
                   const EncoderBackend& encoder, DatasetInfo* info = nullptr);
DatasetInfo load_dataset_info(const std::filesystem::path& dir);
// Throws InputError when a sample has no cached features.
FeatureTable load_feature_table(const std::filesystem::path& dataset_dir, const std::vector<ClipSample>& samples);

struct InferenceModels {
  const StageModel* stage1 = nullptr;
  const StageModel* stage2 = nullptr;
  const ProbeParams* probe = nullptr;
  const MapperParams* probe_mapper = nullptr;
  TrainingConfig config = toy_config();
  // Fraction of S-hat replaced before Stage II conditioning.
  double noise_fraction = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<std::string> noise_vocabulary;
};

// One prediction per sample with whichever fields the supplied models
// produce. Each sample's noise draw is seeded from (noise_seed, sample_id).
std::vector<Prediction> run_inference(const std::vector<ClipSample>& samples, const FeatureTable& features,
                                      const InferenceModels& models, std::vector<std::string>* warnings = nullptr);

std::vector<std::string> attribute_vocabulary_of(const std::vector<ClipSample>& samples);

}  // namespace skillassess
