// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Generator backends: the language model that reads mapped visual rows in
// place of a <video> placeholder and emits text.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "skillassess/common.hpp"
#include "skillassess/matrix.hpp"

namespace skillassess {

inline constexpr std::string_view kVideoPlaceholder = "<video>";

// Word-level tokenizer over a closed vocabulary. Words are lowercase runs of
// non-space, non-punctuation characters; each punctuation character is its
// own token; "<video>" is a special token.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kVideo = 4;
  static constexpr int kNumSpecial = 5;

  // `words` excludes the special tokens; duplicates are dropped and order is
  // made canonical (sorted).
  explicit Tokenizer(std::vector<std::string> words);
  static Tokenizer from_texts(const std::vector<std::string>& texts);
  static std::vector<std::string> split_words(std::string_view text);

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;
  std::size_t size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  // Non-special words only, in canonical order.
  std::vector<std::string> words() const;
  int id_of(std::string_view word) const;

 private:
  std::vector<std::string> vocab_;
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix visual_grad;  // d loss / d visual rows, same shape as the input rows
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;

  virtual std::size_t embed_dim() const = 0;
  virtual std::string backend_id() const = 0;
  virtual std::vector<int> tokenize(std::string_view text) const = 0;

  // Mean next-token negative log-likelihood of `target` (plus end-of-text)
  // given the prompt with visual rows at its <video> placeholder. Adapter
  // gradients are accumulated internally until apply_adapter_update().
  virtual LossAndGrad forward_backward(const Matrix& visual_rows, std::string_view prompt,
                                       std::string_view target) = 0;
  // Same loss, no gradients, dropout off.
  virtual double loss(const Matrix& visual_rows, std::string_view prompt, std::string_view target) const = 0;
  // Adam step on the accumulated adapter gradients (averaged over the
  // accumulated examples), then clears them.
  virtual void apply_adapter_update(double lr) = 0;
  virtual void zero_adapter_grads() = 0;

  // Greedy decoding. Deterministic.
  virtual std::string generate(const Matrix& visual_rows, std::string_view prompt,
                               std::size_t max_tokens) const = 0;

  virtual nlohmann::json save_adapters() const = 0;
  virtual void load_adapters(const nlohmann::json& state) = 0;
  virtual void reset_adapters() = 0;
  virtual std::size_t adapter_parameter_count() const = 0;
  // Digest of the frozen (non-adapter) weights.
  virtual std::string base_fingerprint() const = 0;
  virtual void set_training(bool training) = 0;
  virtual std::unique_ptr<GeneratorBackend> clone() const = 0;

  double train_step(const Matrix& visual_rows, std::string_view prompt, std::string_view target,
                    double lr) {
    const auto r = forward_backward(visual_rows, prompt, target);
    apply_adapter_update(lr);
    return r.loss;
  }
};

struct ToyDecoderConfig {
  std::size_t embed_dim = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ff_mult = 4;
  std::size_t max_len = 384;
  std::size_t lora_rank = 16;
  double lora_alpha = 32.0;
  double lora_dropout = 0.05;
  bool adapt_attention = true;
  bool adapt_mlp = true;
  bool adapt_head = true;
  std::uint64_t base_seed = 1234;
  std::uint64_t adapter_seed = 0;
};

// A small pre-norm transformer decoder. Token/position embeddings and all
// base projections are frozen and derived from base_seed; only low-rank
// adapters (A: in x r random, B: r x out zero) are trainable.
class ToyDecoder : public GeneratorBackend {
 public:
  ToyDecoder(Tokenizer tokenizer, ToyDecoderConfig config);
  ~ToyDecoder() override;
  ToyDecoder(const ToyDecoder& other);
  ToyDecoder& operator=(const ToyDecoder&) = delete;

  std::size_t embed_dim() const override { return config_.embed_dim; }
  std::string backend_id() const override;
  std::vector<int> tokenize(std::string_view text) const override { return tokenizer_.encode(text); }

  LossAndGrad forward_backward(const Matrix& visual_rows, std::string_view prompt,
                               std::string_view target) override;
  double loss(const Matrix& visual_rows, std::string_view prompt, std::string_view target) const override;
  void apply_adapter_update(double lr) override;
  void zero_adapter_grads() override;
  std::string generate(const Matrix& visual_rows, std::string_view prompt,
                       std::size_t max_tokens) const override;

  nlohmann::json save_adapters() const override;
  void load_adapters(const nlohmann::json& state) override;
  void reset_adapters() override;
  std::size_t adapter_parameter_count() const override;
  std::string base_fingerprint() const override;
  void set_training(bool training) override { training_ = training; }
  std::unique_ptr<GeneratorBackend> clone() const override;

  const Tokenizer& tokenizer() const { return tokenizer_; }
  const ToyDecoderConfig& config() const { return config_; }

  // Flat views over adapter parameters and their accumulated gradients, in
  // a fixed order. For gradient checking.
  std::vector<std::span<double>> adapter_tensors();
  std::vector<std::span<const double>> adapter_gradients() const;

 private:
  struct Impl;
  Tokenizer tokenizer_;
  ToyDecoderConfig config_;
  bool training_ = true;
  std::unique_ptr<Impl> impl_;
};

}  // namespace skillassess
