// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Two-stage fine-tuning (attribute generation, then attribute-conditioned
// feedback), the proficiency linear probe, and attribute-noise injection.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "skillassess/commentary.hpp"
#include "skillassess/config.hpp"
#include "skillassess/dataset.hpp"
#include "skillassess/features.hpp"
#include "skillassess/generator.hpp"

namespace skillassess {

inline constexpr std::size_t kDefaultMaxAttributes = 5;

struct TrainingConfig {
  std::size_t lora_rank = 128;
  double lora_alpha = 256.0;
  double lora_dropout = 0.05;
  double lr_mapper = 2e-3;
  double lr_generator = 2e-4;
  std::size_t epochs = 2;
  std::size_t k_max_attributes = kDefaultMaxAttributes;
  std::uint64_t seed = 0;

  std::size_t batch_size = 4;
  // Stop when an epoch's mean loss improves by less than this fraction of
  // the previous epoch's. Zero disables early stopping.
  double early_stop_rel_improvement = 0.01;
  std::uint64_t order_seed = 0;
  std::size_t max_new_tokens = 64;
  // Stage II trains on ground-truth S unless set.
  bool stage2_inferred_conditioning = false;
  bool no_two_stage = false;

  std::string generator_backend = "toy";
  std::size_t embed_dim = 4096;
  std::size_t n_layers = 32;
  std::size_t n_heads = 32;
  std::size_t ff_mult = 4;
  std::size_t max_len = 2048;
  std::size_t mapper_hidden = 0;  // 0 = embed_dim
  bool lora_attention = true;
  bool lora_mlp = false;
  bool lora_head = false;
  std::uint64_t base_seed = 1234;

  // Probe fit.
  double probe_lr = 0.05;
  std::size_t probe_max_iters = 5000;
  double probe_tolerance = 1e-9;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

// Published hyperparameters with production-scale generator dimensions.
TrainingConfig published_config();
// Same optimizer settings scaled to the in-repo toy decoder.
TrainingConfig toy_config();
TrainingConfig preset_config(std::string_view name);

// Throws ConfigError.
void validate(const TrainingConfig& config);
Config to_config(const TrainingConfig& config);
// Keys absent from `config` keep the values of `base`. Unknown keys are
// ignored so backend selections can share the file.
TrainingConfig training_config_from(const Config& config, TrainingConfig base = published_config());

ToyDecoderConfig decoder_config(const TrainingConfig& config);

std::string build_stage1_prompt(std::string_view sport, std::size_t k);
std::string build_stage2_prompt(std::string_view sport, const AttributeSet& s_hat,
                                std::uint64_t order_seed = 0);

// Seeded, sample-independent order; "; " separated.
std::vector<std::string> ordered_attributes(const AttributeSet& s, std::uint64_t order_seed);
std::string serialize_attributes(const AttributeSet& s, std::uint64_t order_seed = 0);
// Normalized, deduplicated, in emission order.
std::vector<std::string> parse_attribute_list(std::string_view text);
AttributeSet parse_attribute_output(std::string_view text);

using FeatureTable = std::map<std::string, FeatureSequence>;

// Closed vocabulary for the toy decoder: prompts, attributes and feedback of
// the given samples.
Tokenizer build_tokenizer(const std::vector<ClipSample>& samples, const TrainingConfig& config);
std::unique_ptr<GeneratorBackend> make_generator(const TrainingConfig& config, Tokenizer tokenizer);

struct StageModel {
  MapperParams mapper;
  std::unique_ptr<GeneratorBackend> generator;

  StageModel() = default;
  StageModel(MapperParams m, std::unique_ptr<GeneratorBackend> g)
      : mapper(std::move(m)), generator(std::move(g)) {}
  StageModel(const StageModel& other);
  StageModel& operator=(const StageModel& other);
  StageModel(StageModel&&) = default;
  StageModel& operator=(StageModel&&) = default;
};

// Fresh mapper (feature_dim -> embed_dim) and an adapter-initialized
// generator whose vocabulary covers `vocab_samples`.
StageModel init_stage_model(const std::vector<ClipSample>& vocab_samples, std::size_t feature_dim,
                            const TrainingConfig& config);

struct TrainResult {
  std::vector<double> loss_curve;  // one entry per optimizer step
  std::vector<double> epoch_losses;
  std::size_t steps = 0;
  bool early_stopped = false;
};

// Updates `model` in place. Throws ArgumentError on an empty train set or a
// sample without features or attributes, NumericError on a non-finite loss.
TrainResult train_stage1(const std::vector<ClipSample>& train_samples, const FeatureTable& features,
                         StageModel& model, const TrainingConfig& config);

struct AttributeInference {
  std::vector<std::string> attributes;  // emission order, at most k
  std::vector<std::string> warnings;
  AttributeSet set() const { return {attributes.begin(), attributes.end()}; }
};

AttributeInference infer_attribute_list(const ClipSample& sample, const FeatureTable& features,
                                        const MapperParams& mapper, const GeneratorBackend& generator,
                                        std::size_t k, std::size_t max_tokens = 64);
AttributeSet infer_attributes(const ClipSample& sample, const FeatureTable& features,
                              const MapperParams& mapper, const GeneratorBackend& generator,
                              std::size_t k, std::size_t max_tokens = 64);

struct Stage2Output {
  StageModel model;
  TrainResult result;
};

// Starts from `stage1` (mapper and adapters). With config.no_two_stage the
// stage starts from a fresh mapper and adapters on `base_generator` and the
// prompt carries no attributes; otherwise a missing stage1 is a ConfigError.
Stage2Output train_stage2(const std::vector<ClipSample>& train_samples, const FeatureTable& features,
                          const StageModel* stage1, const GeneratorBackend& base_generator,
                          const TrainingConfig& config);

std::string generate_feedback(const ClipSample& sample, const FeatureTable& features,
                              const StageModel& stage2, const AttributeSet& s_hat,
                              const TrainingConfig& config);

struct FeedbackInference {
  AttributeSet s_hat;
  std::string text;
};

// Infers S-hat with stage1 (unless no_two_stage), then generates feedback.
FeedbackInference infer_feedback(const ClipSample& sample, const FeatureTable& features,
                                 const StageModel* stage1, const StageModel& stage2,
                                 const TrainingConfig& config);

struct NoiseResult {
  AttributeSet set;
  std::vector<std::string> warnings;
};

// Replaces round-half-up(|s_hat| * fraction) members with uniform draws from
// vocabulary minus s_hat.
NoiseResult inject_attribute_noise(const AttributeSet& s_hat, double fraction,
                                   const std::vector<std::string>& vocabulary, Rng& rng);

inline constexpr std::size_t kProficiencyClasses = 4;

class ProbeParams {
 public:
  // Throws ShapeError unless weights is D x 4 and bias has 4 entries.
  ProbeParams(Matrix weights, std::vector<double> bias);
  static ProbeParams zeros(std::size_t dim);

  const Matrix& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }
  Matrix& weights() { return weights_; }
  std::vector<double>& bias() { return bias_; }
  std::size_t dim() const { return weights_.rows(); }

  friend bool operator==(const ProbeParams&, const ProbeParams&) = default;

 private:
  Matrix weights_;
  std::vector<double> bias_;
};

nlohmann::json to_json(const ProbeParams& p);
ProbeParams probe_from_json(const nlohmann::json& j);

struct ProbeFit {
  ProbeParams params = ProbeParams::zeros(0);
  std::vector<std::string> warnings;
  std::size_t iterations = 0;
  double final_loss = 0.0;
};

ProbeFit train_linear_probe(const std::vector<std::vector<double>>& pooled_features,
                            const std::vector<Proficiency>& labels, const TrainingConfig& config);
std::vector<double> probe_logits(std::span<const double> x, const ProbeParams& probe);
// Ties go to the lowest class index.
Proficiency predict_proficiency(std::span<const double> x, const ProbeParams& probe);

// Mean over mapped rows.
std::vector<double> pool_mapped_features(const FeatureSequence& seq, const MapperParams& mapper);

struct CheckpointMeta {
  std::string stage;  // "stage1" | "stage2" | "probe"
  std::size_t embed_dim = 0;
  std::size_t feature_dim = 0;
  std::string generator_backend_id;
  std::string base_fingerprint;
  std::string split_hash;
  std::vector<std::string> vocabulary;
  std::vector<double> loss_curve;
  bool no_two_stage = false;
};

// Directory layout: mapper.json, adapters.json, probe.json (optional),
// config.txt, meta.json. Each file is written atomically; meta.json last.
void save_checkpoint(const std::filesystem::path& dir, const StageModel& model,
                     const TrainingConfig& config, const CheckpointMeta& meta,
                     const ProbeParams* probe = nullptr);

struct LoadedCheckpoint {
  StageModel model;
  TrainingConfig config;
  CheckpointMeta meta;
  std::optional<ProbeParams> probe;
};

// Rebuilds the generator from the stored vocabulary and config. Throws
// ConfigError when expected_embed_dim is given and differs, or when the
// rebuilt base weights do not match the stored fingerprint.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 std::optional<std::size_t> expected_embed_dim = std::nullopt);

}  // namespace skillassess
