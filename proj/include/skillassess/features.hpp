// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Per-second, per-view frozen clip features and the trainable two-layer
// mapper into the generator's embedding space.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "skillassess/dataset.hpp"
#include "skillassess/matrix.hpp"

namespace skillassess {

struct ViewBlock {
  std::string view_id;
  std::size_t dim = 0;
  friend bool operator==(const ViewBlock&, const ViewBlock&) = default;
};

struct FeatureSequence {
  std::string sample_id;
  Matrix frames;  // T_w x D, views concatenated column-wise
  std::vector<ViewBlock> view_layout;

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

// One feature per second: ceil(window length).
std::size_t frame_count(double start_s, double end_s);
// Second anchors; a fractional trailing second is anchored at end_s - 1.
std::vector<double> frame_anchors(double start_s, double end_s);

class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  // Returns frame_count(start_s, end_s) x feature_dim(). Must not mutate
  // observable state. Throws EncodingError for views it cannot serve.
  virtual Matrix encode(const std::string& video_id, const std::string& view_id, double start_s,
                        double end_s) const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual std::string backend_id() const = 0;
};

// A planted ground-truth event the synthetic encoder renders into features.
struct PlantedEvent {
  std::string video_id;
  double timestamp_s = 0.0;
  AttributeSet attributes;
  std::optional<Proficiency> proficiency;
};

struct SyntheticEncoderOptions {
  std::uint64_t seed = 0;
  double signal_strength = 1.0;
  std::size_t feature_dim = 16;
  double noise_scale = 0.5;
  // Seconds around an event timestamp where its signal is present.
  double event_radius_s = 10.0;
};

// Each attribute (and proficiency class) is a fixed seeded random direction
// per view; frames near an event carry signal_strength times the sum of its
// directions plus seeded per-frame noise.
class SyntheticEncoder : public EncoderBackend {
 public:
  SyntheticEncoder(SyntheticEncoderOptions options, std::vector<PlantedEvent> events);

  Matrix encode(const std::string& video_id, const std::string& view_id, double start_s,
                double end_s) const override;
  std::size_t feature_dim() const override { return options_.feature_dim; }
  std::string backend_id() const override;

  std::vector<double> direction(std::string_view name, std::string_view view_id) const;
  const SyntheticEncoderOptions& options() const { return options_; }

 private:
  SyntheticEncoderOptions options_;
  std::map<std::string, std::vector<PlantedEvent>> events_;
  std::string events_digest_;
};

std::unique_ptr<SyntheticEncoder> synthetic_encoder(std::uint64_t seed, double signal_strength,
                                                    std::vector<PlantedEvent> events,
                                                    std::size_t feature_dim = 16);

FeatureSequence encode_clip(const ClipSample& sample, const EncoderBackend& backend);

// On-disk cache: one little-endian row-major float32 blob per sample plus a
// line-delimited manifest (sample_id, shape, dtype, backend_id, checksum).
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path dir);

  // Writes the blob atomically and appends a manifest entry. Returns the
  // blob path.
  std::filesystem::path put(const FeatureSequence& seq, const std::string& backend_id);
  std::optional<FeatureSequence> get(const std::string& sample_id, const std::string& backend_id) const;
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path manifest_path() const { return dir_ / "manifest.jsonl"; }

  static std::string encode_blob(const Matrix& m);
  static Matrix decode_blob(std::string_view bytes, std::size_t rows, std::size_t cols);

 private:
  std::filesystem::path blob_path(const std::string& sample_id, const std::string& backend_id) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

struct MapperParams {
  Matrix w1;  // d_in x hidden
  std::vector<double> b1;
  Matrix w2;  // hidden x d_out
  std::vector<double> b2;

  std::size_t d_in() const { return w1.rows(); }
  std::size_t hidden() const { return w1.cols(); }
  std::size_t d_out() const { return w2.cols(); }
  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
  bool all_finite() const;

  friend bool operator==(const MapperParams&, const MapperParams&) = default;
};

struct MapperGrads {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

// Hidden width defaults to d_out.
MapperParams init_mapper(std::size_t d_in, std::size_t d_out, std::uint64_t seed,
                         std::size_t hidden = 0);

nlohmann::json to_json(const MapperParams& p);
MapperParams mapper_from_json(const nlohmann::json& j);

struct MapperActivations {
  Matrix input;
  Matrix pre;  // input * w1 + b1
  Matrix act;  // gelu(pre)
};

// Row-wise affine -> GELU -> affine. Throws ShapeError on a column mismatch.
Matrix map_features(const Matrix& v_prime, const MapperParams& params,
                    MapperActivations* activations = nullptr);
Matrix map_features(const FeatureSequence& v_prime, const MapperParams& params);

MapperGrads mapper_backward(const MapperActivations& acts, const MapperParams& params,
                            const Matrix& d_out);

}  // namespace skillassess
