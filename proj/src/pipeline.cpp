// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/pipeline.hpp"

#include <set>

#include "skillassess/common.hpp"
#include "skillassess/error.hpp"

namespace skillassess {

FeatureTable encode_features(const std::vector<ClipSample>& samples, const EncoderBackend& encoder) {
  FeatureTable out;
  for (const auto& s : samples) out.emplace(s.sample_id, encode_clip(s, encoder));
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<ClipSample>& samples,
                   const EncoderBackend& encoder, DatasetInfo* info) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "samples.jsonl", serialize_samples(samples));
  FeatureCache cache(dir / "features");
  std::size_t dim = 0;
  for (const auto& s : samples) {
    const auto seq = encode_clip(s, encoder);
    dim = seq.frames.cols();
    cache.put(seq, encoder.backend_id());
  }
  DatasetInfo meta{encoder.backend_id(), dim, samples.size()};
  write_file_atomic(dir / "dataset.json", nlohmann::json{{"encoder_backend_id", meta.encoder_backend_id},
                                                         {"feature_dim", meta.feature_dim},
                                                         {"sample_count", meta.sample_count}}
                                                  .dump(1) +
                                              "\n");
  if (info) *info = meta;
}

DatasetInfo load_dataset_info(const std::filesystem::path& dir) {
  const auto path = dir / "dataset.json";
  if (!std::filesystem::exists(path)) throw InputError("not a dataset directory (missing dataset.json): " + dir.string());
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    return {j.at("encoder_backend_id").get<std::string>(), j.at("feature_dim").get<std::size_t>(),
            j.at("sample_count").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("dataset", path.string() + ": " + e.what());
  }
}

FeatureTable load_feature_table(const std::filesystem::path& dataset_dir, const std::vector<ClipSample>& samples) {
  const auto info = load_dataset_info(dataset_dir);
  FeatureCache cache(dataset_dir / "features");
  FeatureTable out;
  for (const auto& s : samples) {
    auto seq = cache.get(s.sample_id, info.encoder_backend_id);
    if (!seq) throw InputError("no cached features for " + s.sample_id + " in " + dataset_dir.string());
    out.emplace(s.sample_id, std::move(*seq));
  }
  return out;
}

std::vector<std::string> attribute_vocabulary_of(const std::vector<ClipSample>& samples) {
  std::set<std::string> v;
  for (const auto& s : samples) v.insert(s.attributes.begin(), s.attributes.end());
  return {v.begin(), v.end()};
}

std::vector<Prediction> run_inference(const std::vector<ClipSample>& samples, const FeatureTable& features,
                                      const InferenceModels& m, std::vector<std::string>* warnings) {
  if (m.probe && !m.probe_mapper) throw ConfigError("a probe needs the mapper it was fitted on");
  if (m.stage2 && !m.stage1 && !m.config.no_two_stage) {
    throw ConfigError("feedback inference needs a stage 1 checkpoint (or no_two_stage)");
  }
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Prediction p;
    p.sample_id = s.sample_id;
    AttributeSet s_hat;
    if (m.stage1) {
      auto inf = infer_attribute_list(s, features, m.stage1->mapper, *m.stage1->generator, m.config.k_max_attributes,
                                      m.config.max_new_tokens);
      if (warnings) warnings->insert(warnings->end(), inf.warnings.begin(), inf.warnings.end());
      s_hat = inf.set();
      p.attributes = s_hat;
    }
    if (m.stage2) {
      AttributeSet cond;
      if (!m.config.no_two_stage) {
        cond = s_hat;
        if (m.noise_fraction > 0.0) {
          Rng rng(fnv1a64(s.sample_id, m.noise_seed));
          auto noisy = inject_attribute_noise(s_hat, m.noise_fraction, m.noise_vocabulary, rng);
          if (warnings) warnings->insert(warnings->end(), noisy.warnings.begin(), noisy.warnings.end());
          cond = std::move(noisy.set);
        }
      }
      p.feedback = generate_feedback(s, features, *m.stage2, cond, m.config);
    }
    if (m.probe) {
      auto it = features.find(s.sample_id);
      if (it == features.end()) throw ArgumentError("no cached features for sample " + s.sample_id);
      p.proficiency = predict_proficiency(pool_mapped_features(it->second, *m.probe_mapper), *m.probe);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace skillassess
