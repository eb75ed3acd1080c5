// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <set>

#include "skillassess/error.hpp"
#include "skillassess/extraction.hpp"

namespace skillassess {

TrainingConfig published_config() { return TrainingConfig{}; }

TrainingConfig toy_config() {
  TrainingConfig c;
  c.lora_rank = 16;
  c.lora_alpha = 32.0;
  c.epochs = 30;
  c.early_stop_rel_improvement = 0.0;
  c.embed_dim = 32;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_len = 384;
  c.lora_mlp = true;
  c.lora_head = true;
  return c;
}

TrainingConfig preset_config(std::string_view name) {
  if (name == "published") return published_config();
  if (name == "toy") return toy_config();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected published or toy)");
}

void validate(const TrainingConfig& c) {
  auto rate = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError(std::string(name) + " must be finite and >= 0");
  };
  rate(c.lr_mapper, "lr_mapper");
  rate(c.lr_generator, "lr_generator");
  rate(c.probe_lr, "probe_lr");
  rate(c.early_stop_rel_improvement, "early_stop_rel_improvement");
  if (!(c.lora_dropout >= 0.0 && c.lora_dropout < 1.0)) throw ConfigError("lora_dropout must be in [0, 1)");
  if (!(c.lora_alpha > 0.0)) throw ConfigError("lora_alpha must be > 0");
  if (c.lora_rank == 0) throw ConfigError("lora_rank must be >= 1");
  if (c.k_max_attributes < 1) throw ConfigError("k_max_attributes must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.embed_dim == 0 || c.n_layers == 0 || c.n_heads == 0 || c.ff_mult == 0) {
    throw ConfigError("generator dimensions must be >= 1");
  }
  if (c.embed_dim % c.n_heads != 0) throw ConfigError("embed_dim must be divisible by n_heads");
  if (c.generator_backend != "toy") {
    throw ConfigError("unknown generator_backend '" + c.generator_backend + "' (available: toy)");
  }
}

namespace {

std::string fmt_double(double v) {
  // Shortest round-trip representation.
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  for (int prec = 1; prec <= 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

Config to_config(const TrainingConfig& c) {
  Config out;
  out.set("lora_rank", std::to_string(c.lora_rank));
  out.set("lora_alpha", fmt_double(c.lora_alpha));
  out.set("lora_dropout", fmt_double(c.lora_dropout));
  out.set("lr_mapper", fmt_double(c.lr_mapper));
  out.set("lr_generator", fmt_double(c.lr_generator));
  out.set("epochs", std::to_string(c.epochs));
  out.set("k_max_attributes", std::to_string(c.k_max_attributes));
  out.set("seed", std::to_string(c.seed));
  out.set("batch_size", std::to_string(c.batch_size));
  out.set("early_stop_rel_improvement", fmt_double(c.early_stop_rel_improvement));
  out.set("order_seed", std::to_string(c.order_seed));
  out.set("max_new_tokens", std::to_string(c.max_new_tokens));
  out.set("stage2_inferred_conditioning", fmt_bool(c.stage2_inferred_conditioning));
  out.set("no_two_stage", fmt_bool(c.no_two_stage));
  out.set("generator_backend", c.generator_backend);
  out.set("embed_dim", std::to_string(c.embed_dim));
  out.set("n_layers", std::to_string(c.n_layers));
  out.set("n_heads", std::to_string(c.n_heads));
  out.set("ff_mult", std::to_string(c.ff_mult));
  out.set("max_len", std::to_string(c.max_len));
  out.set("mapper_hidden", std::to_string(c.mapper_hidden));
  out.set("lora_attention", fmt_bool(c.lora_attention));
  out.set("lora_mlp", fmt_bool(c.lora_mlp));
  out.set("lora_head", fmt_bool(c.lora_head));
  out.set("base_seed", std::to_string(c.base_seed));
  out.set("probe_lr", fmt_double(c.probe_lr));
  out.set("probe_max_iters", std::to_string(c.probe_max_iters));
  out.set("probe_tolerance", fmt_double(c.probe_tolerance));
  return out;
}

TrainingConfig training_config_from(const Config& cfg, TrainingConfig c) {
  auto sz = [&](const char* key, std::size_t& field) { field = cfg.get_uint(key, field); };
  auto dbl = [&](const char* key, double& field) { field = cfg.get_double(key, field); };
  auto bln = [&](const char* key, bool& field) { field = cfg.get_bool(key, field); };
  sz("lora_rank", c.lora_rank);
  dbl("lora_alpha", c.lora_alpha);
  dbl("lora_dropout", c.lora_dropout);
  dbl("lr_mapper", c.lr_mapper);
  dbl("lr_generator", c.lr_generator);
  sz("epochs", c.epochs);
  sz("k_max_attributes", c.k_max_attributes);
  c.seed = cfg.get_uint("seed", c.seed);
  sz("batch_size", c.batch_size);
  dbl("early_stop_rel_improvement", c.early_stop_rel_improvement);
  c.order_seed = cfg.get_uint("order_seed", c.order_seed);
  sz("max_new_tokens", c.max_new_tokens);
  bln("stage2_inferred_conditioning", c.stage2_inferred_conditioning);
  bln("no_two_stage", c.no_two_stage);
  c.generator_backend = cfg.get_string("generator_backend", c.generator_backend);
  sz("embed_dim", c.embed_dim);
  sz("n_layers", c.n_layers);
  sz("n_heads", c.n_heads);
  sz("ff_mult", c.ff_mult);
  sz("max_len", c.max_len);
  sz("mapper_hidden", c.mapper_hidden);
  bln("lora_attention", c.lora_attention);
  bln("lora_mlp", c.lora_mlp);
  bln("lora_head", c.lora_head);
  c.base_seed = cfg.get_uint("base_seed", c.base_seed);
  dbl("probe_lr", c.probe_lr);
  sz("probe_max_iters", c.probe_max_iters);
  dbl("probe_tolerance", c.probe_tolerance);
  return c;
}

ToyDecoderConfig decoder_config(const TrainingConfig& c) {
  ToyDecoderConfig d;
  d.embed_dim = c.embed_dim;
  d.n_layers = c.n_layers;
  d.n_heads = c.n_heads;
  d.ff_mult = c.ff_mult;
  d.max_len = c.max_len;
  d.lora_rank = c.lora_rank;
  d.lora_alpha = c.lora_alpha;
  d.lora_dropout = c.lora_dropout;
  d.adapt_attention = c.lora_attention;
  d.adapt_mlp = c.lora_mlp;
  d.adapt_head = c.lora_head;
  d.base_seed = c.base_seed;
  d.adapter_seed = c.seed;
  return d;
}

// ---------------------------------------------------------------------------
// Prompts and attribute serialization

std::string build_stage1_prompt(std::string_view sport, std::size_t k) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  if (trim(sport).empty()) throw ArgumentError("sport must be non-empty");
  return "<video> Here is a video of a person doing " + std::string(sport) + ". Highlight up to " +
         std::to_string(k) + " key concept areas where the person can improve: ...";
}

std::string build_stage2_prompt(std::string_view sport, const AttributeSet& s_hat, std::uint64_t order_seed) {
  if (trim(sport).empty()) throw ArgumentError("sport must be non-empty");
  const std::string axes = s_hat.empty() ? std::string("none") : serialize_attributes(s_hat, order_seed);
  return "<video> Here is a video of a person doing " + std::string(sport) +
         ". Here are some possible axes that need improvement, as rated by an AI coach (may contain "
         "mistakes): " +
         axes + ". Give feedback on the execution that will help the person improve.";
}

std::vector<std::string> ordered_attributes(const AttributeSet& s, std::uint64_t order_seed) {
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  keyed.reserve(s.size());
  for (const auto& a : s) keyed.emplace_back(fnv1a64(a, order_seed), a);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  out.reserve(keyed.size());
  for (auto& [_, a] : keyed) out.push_back(std::move(a));
  return out;
}

std::string serialize_attributes(const AttributeSet& s, std::uint64_t order_seed) {
  return join(ordered_attributes(s, order_seed), "; ");
}

std::vector<std::string> parse_attribute_list(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string cur;
  auto flush = [&] {
    auto a = normalize_attribute(cur);
    cur.clear();
    if (a.empty() || a == "...") return;
    if (seen.insert(a).second) out.push_back(std::move(a));
  };
  for (char c : text) {
    if (c == ';' || c == ',' || c == '\n') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

AttributeSet parse_attribute_output(std::string_view text) {
  auto list = parse_attribute_list(text);
  return {list.begin(), list.end()};
}

// ---------------------------------------------------------------------------
// Generator construction

Tokenizer build_tokenizer(const std::vector<ClipSample>& samples, const TrainingConfig& config) {
  std::vector<std::string> texts;
  texts.push_back(build_stage2_prompt("none", {}));
  std::set<std::string> sports;
  for (const auto& s : samples) {
    sports.insert(s.sport);
    for (const auto& a : s.attributes) texts.push_back(a);
    texts.push_back(s.feedback_text);
  }
  for (const auto& sport : sports) {
    texts.push_back(build_stage1_prompt(sport, config.k_max_attributes));
    texts.push_back(sport);
  }
  texts.push_back(";");
  return Tokenizer::from_texts(texts);
}

std::unique_ptr<GeneratorBackend> make_generator(const TrainingConfig& config, Tokenizer tokenizer) {
  validate(config);
  return std::make_unique<ToyDecoder>(std::move(tokenizer), decoder_config(config));
}

StageModel::StageModel(const StageModel& other)
    : mapper(other.mapper), generator(other.generator ? other.generator->clone() : nullptr) {}

StageModel& StageModel::operator=(const StageModel& other) {
  if (this != &other) {
    mapper = other.mapper;
    generator = other.generator ? other.generator->clone() : nullptr;
  }
  return *this;
}

namespace {
constexpr std::uint64_t kMapperSeedSalt = 0x6d617070ULL;
}  // namespace

StageModel init_stage_model(const std::vector<ClipSample>& vocab_samples, std::size_t feature_dim,
                            const TrainingConfig& config) {
  if (vocab_samples.empty()) throw ArgumentError("cannot build a generator vocabulary from zero samples");
  if (feature_dim == 0) throw ArgumentError("feature_dim must be >= 1");
  auto gen = make_generator(config, build_tokenizer(vocab_samples, config));
  auto mapper = init_mapper(feature_dim, gen->embed_dim(), config.seed ^ kMapperSeedSalt, config.mapper_hidden);
  return StageModel(std::move(mapper), std::move(gen));
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

const FeatureSequence& features_for(const FeatureTable& features, const ClipSample& s) {
  auto it = features.find(s.sample_id);
  if (it == features.end()) throw ArgumentError("no cached features for sample " + s.sample_id);
  return it->second;
}

struct Example {
  const Matrix* frames;
  std::string prompt;
  std::string target;
};

struct MapperOptimizer {
  AdamState w1, b1, w2, b2;
  MapperGrads acc;

  explicit MapperOptimizer(const MapperParams& p) {
    w1.resize(p.w1.size());
    b1.resize(p.b1.size());
    w2.resize(p.w2.size());
    b2.resize(p.b2.size());
    clear(p);
  }

  void clear(const MapperParams& p) {
    acc.w1 = Matrix(p.w1.rows(), p.w1.cols());
    acc.b1.assign(p.b1.size(), 0.0);
    acc.w2 = Matrix(p.w2.rows(), p.w2.cols());
    acc.b2.assign(p.b2.size(), 0.0);
  }

  void add(const MapperGrads& g) {
    add_inplace(acc.w1, g.w1);
    add_inplace(acc.w2, g.w2);
    for (std::size_t i = 0; i < acc.b1.size(); ++i) acc.b1[i] += g.b1[i];
    for (std::size_t i = 0; i < acc.b2.size(); ++i) acc.b2[i] += g.b2[i];
  }

  void step(MapperParams& p, std::size_t count, double lr) {
    const double inv = 1.0 / static_cast<double>(count);
    for (auto& x : acc.w1.data()) x *= inv;
    for (auto& x : acc.w2.data()) x *= inv;
    for (auto& x : acc.b1) x *= inv;
    for (auto& x : acc.b2) x *= inv;
    adam_update(p.w1.data(), acc.w1.data(), w1, lr);
    adam_update(p.b1, acc.b1, b1, lr);
    adam_update(p.w2.data(), acc.w2.data(), w2, lr);
    adam_update(p.b2, acc.b2, b2, lr);
    clear(p);
  }
};

TrainResult run_training(const std::vector<Example>& examples, StageModel& model,
                         const TrainingConfig& config, std::uint64_t stream) {
  if (!model.generator) throw ConfigError("stage model has no generator");
  if (model.mapper.d_out() != model.generator->embed_dim()) {
    throw ShapeError("mapper output width " + std::to_string(model.mapper.d_out()) +
                     " does not match generator embed_dim " + std::to_string(model.generator->embed_dim()));
  }
  TrainResult result;
  MapperOptimizer opt(model.mapper);
  GeneratorBackend& gen = *model.generator;
  gen.zero_adapter_grads();
  gen.set_training(true);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(config.seed ^ (stream * 0x9e3779b97f4a7c15ULL) ^ (epoch + 1));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    double batch_loss = 0.0;
    std::size_t in_batch = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const Example& ex = examples[order[pos]];
      MapperActivations acts;
      Matrix rows = map_features(*ex.frames, model.mapper, &acts);
      LossAndGrad lg = gen.forward_backward(rows, ex.prompt, ex.target);
      if (!std::isfinite(lg.loss)) {
        gen.set_training(false);
        throw NumericError("non-finite loss at step " + std::to_string(result.steps));
      }
      opt.add(mapper_backward(acts, model.mapper, lg.visual_grad));
      batch_loss += lg.loss;
      epoch_loss += lg.loss;
      ++in_batch;
      if (in_batch == config.batch_size || pos + 1 == order.size()) {
        opt.step(model.mapper, in_batch, config.lr_mapper);
        gen.apply_adapter_update(config.lr_generator);
        result.loss_curve.push_back(batch_loss / static_cast<double>(in_batch));
        ++result.steps;
        batch_loss = 0.0;
        in_batch = 0;
      }
    }
    const double mean = epoch_loss / static_cast<double>(examples.size());
    result.epoch_losses.push_back(mean);
    if (config.early_stop_rel_improvement > 0.0 && result.epoch_losses.size() >= 2) {
      const double prev = result.epoch_losses[result.epoch_losses.size() - 2];
      if (prev > 0.0 && (prev - mean) / prev < config.early_stop_rel_improvement) {
        result.early_stopped = true;
        break;
      }
    }
  }
  gen.set_training(false);
  return result;
}

}  // namespace

TrainResult train_stage1(const std::vector<ClipSample>& train_samples, const FeatureTable& features,
                         StageModel& model, const TrainingConfig& config) {
  validate(config);
  std::vector<Example> examples;
  for (const auto& s : train_samples) {
    if (s.attributes.empty()) continue;
    examples.push_back({&features_for(features, s).frames, build_stage1_prompt(s.sport, config.k_max_attributes),
                        serialize_attributes(s.attributes, config.order_seed)});
  }
  if (examples.empty()) throw ArgumentError("stage 1 needs at least one sample with attributes");
  return run_training(examples, model, config, 1);
}

AttributeInference infer_attribute_list(const ClipSample& sample, const FeatureTable& features,
                                        const MapperParams& mapper, const GeneratorBackend& generator,
                                        std::size_t k, std::size_t max_tokens) {
  const auto prompt = build_stage1_prompt(sample.sport, k);
  const Matrix rows = map_features(features_for(features, sample).frames, mapper);
  const std::string text = generator.generate(rows, prompt, max_tokens);
  AttributeInference out;
  if (generator.tokenize(text).size() >= max_tokens) {
    out.warnings.push_back("generation for " + sample.sample_id + " hit max_tokens; best-effort parse");
  }
  out.attributes = parse_attribute_list(text);
  if (out.attributes.size() > k) out.attributes.resize(k);
  return out;
}

AttributeSet infer_attributes(const ClipSample& sample, const FeatureTable& features, const MapperParams& mapper,
                              const GeneratorBackend& generator, std::size_t k, std::size_t max_tokens) {
  return infer_attribute_list(sample, features, mapper, generator, k, max_tokens).set();
}

Stage2Output train_stage2(const std::vector<ClipSample>& train_samples, const FeatureTable& features,
                          const StageModel* stage1, const GeneratorBackend& base_generator,
                          const TrainingConfig& config) {
  validate(config);
  if (!config.no_two_stage && stage1 == nullptr) {
    throw ConfigError("stage 2 requires a stage 1 checkpoint (or no_two_stage)");
  }
  Stage2Output out;
  if (config.no_two_stage) {
    std::size_t d_in = 0;
    for (const auto& s : train_samples) {
      d_in = features_for(features, s).frames.cols();
      break;
    }
    if (d_in == 0) throw ArgumentError("stage 2 needs at least one training sample");
    auto gen = base_generator.clone();
    gen->reset_adapters();
    auto mapper = init_mapper(d_in, gen->embed_dim(), config.seed ^ kMapperSeedSalt, config.mapper_hidden);
    out.model = StageModel(std::move(mapper), std::move(gen));
  } else {
    out.model = *stage1;
  }

  std::vector<Example> examples;
  for (const auto& s : train_samples) {
    if (trim(s.feedback_text).empty()) continue;
    AttributeSet cond;
    if (!config.no_two_stage) {
      cond = config.stage2_inferred_conditioning
                 ? infer_attributes(s, features, stage1->mapper, *stage1->generator, config.k_max_attributes,
                                    config.max_new_tokens)
                 : s.attributes;
    }
    examples.push_back({&features_for(features, s).frames, build_stage2_prompt(s.sport, cond, config.order_seed),
                        s.feedback_text});
  }
  if (examples.empty()) throw ArgumentError("stage 2 needs at least one sample with feedback text");
  out.result = run_training(examples, out.model, config, 2);
  return out;
}

std::string generate_feedback(const ClipSample& sample, const FeatureTable& features, const StageModel& stage2,
                              const AttributeSet& s_hat, const TrainingConfig& config) {
  const auto prompt = build_stage2_prompt(sample.sport, s_hat, config.order_seed);
  const Matrix rows = map_features(features_for(features, sample).frames, stage2.mapper);
  return stage2.generator->generate(rows, prompt, config.max_new_tokens);
}

FeedbackInference infer_feedback(const ClipSample& sample, const FeatureTable& features, const StageModel* stage1,
                                 const StageModel& stage2, const TrainingConfig& config) {
  FeedbackInference out;
  if (!config.no_two_stage) {
    if (stage1 == nullptr) throw ConfigError("feedback inference requires a stage 1 checkpoint (or no_two_stage)");
    out.s_hat = infer_attributes(sample, features, stage1->mapper, *stage1->generator, config.k_max_attributes,
                                 config.max_new_tokens);
  }
  out.text = generate_feedback(sample, features, stage2, out.s_hat, config);
  return out;
}

// ---------------------------------------------------------------------------
// Noise injection

NoiseResult inject_attribute_noise(const AttributeSet& s_hat, double fraction,
                                   const std::vector<std::string>& vocabulary, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("noise fraction must be in [0, 1]");
  if (vocabulary.empty()) throw ArgumentError("noise vocabulary must be non-empty");
  NoiseResult out;
  const auto count =
      static_cast<std::size_t>(std::floor(static_cast<double>(s_hat.size()) * fraction + 0.5));
  if (count == 0) {
    out.set = s_hat;
    return out;
  }
  std::vector<std::string> members(s_hat.begin(), s_hat.end());
  rng.shuffle(members);
  std::set<std::string> vocab_set(vocabulary.begin(), vocabulary.end());
  std::vector<std::string> candidates;
  for (const auto& v : vocab_set) {
    if (!s_hat.contains(v)) candidates.push_back(v);
  }
  std::vector<std::string> replacements;
  if (candidates.size() >= count) {
    rng.shuffle(candidates);
    replacements.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    out.warnings.push_back("vocabulary has " + std::to_string(candidates.size()) + " attributes outside the set, " +
                           std::to_string(count) + " replacements needed; drawing with repetition");
    const auto& pool = candidates.empty() ? std::vector<std::string>(vocab_set.begin(), vocab_set.end()) : candidates;
    for (std::size_t i = 0; i < count; ++i) replacements.push_back(pool[rng.below(pool.size())]);
  }
  out.set.insert(members.begin() + static_cast<std::ptrdiff_t>(count), members.end());
  out.set.insert(replacements.begin(), replacements.end());
  return out;
}

// ---------------------------------------------------------------------------
// Linear probe

ProbeParams::ProbeParams(Matrix weights, std::vector<double> bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.cols() != kProficiencyClasses || bias_.size() != kProficiencyClasses) {
    throw ShapeError("probe output size must be 4, got weights with " + std::to_string(weights_.cols()) +
                     " columns and bias of length " + std::to_string(bias_.size()));
  }
}

ProbeParams ProbeParams::zeros(std::size_t dim) {
  return ProbeParams(Matrix(dim, kProficiencyClasses), std::vector<double>(kProficiencyClasses, 0.0));
}

nlohmann::json to_json(const ProbeParams& p) {
  return nlohmann::json{{"dim", p.dim()},
                        {"classes", kProficiencyClasses},
                        {"weights", p.weights().data()},
                        {"bias", p.bias()}};
}

ProbeParams probe_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    const auto classes = j.at("classes").get<std::size_t>();
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != dim * classes) throw ShapeError("probe weights have the wrong length");
    Matrix m(dim, classes);
    m.data() = std::move(w);
    return ProbeParams(std::move(m), j.at("bias").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed probe parameters", e.what());
  }
}

std::vector<double> probe_logits(std::span<const double> x, const ProbeParams& probe) {
  if (x.size() != probe.dim()) {
    throw ShapeError("probe expects " + std::to_string(probe.dim()) + " features, got " + std::to_string(x.size()));
  }
  std::vector<double> z = probe.bias();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto row = probe.weights().row(i);
    for (std::size_t c = 0; c < kProficiencyClasses; ++c) z[c] += x[i] * row[c];
  }
  return z;
}

Proficiency predict_proficiency(std::span<const double> x, const ProbeParams& probe) {
  const auto z = probe_logits(x, probe);
  std::size_t best = 0;
  for (std::size_t c = 1; c < z.size(); ++c) {
    if (z[c] > z[best]) best = c;
  }
  return kProficiencyOrder[best];
}

ProbeFit train_linear_probe(const std::vector<std::vector<double>>& x, const std::vector<Proficiency>& labels,
                            const TrainingConfig& config) {
  if (x.size() != labels.size()) throw ArgumentError("probe features and labels differ in length");
  if (x.empty()) throw ArgumentError("probe needs at least one labeled example");
  const std::size_t d = x.front().size();
  for (const auto& row : x) {
    if (row.size() != d) throw ShapeError("probe features have inconsistent widths");
  }
  std::vector<std::size_t> y(labels.size());
  std::set<std::size_t> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = static_cast<std::size_t>(labels[i]);
    classes.insert(y[i]);
  }
  ProbeFit fit;
  fit.params = ProbeParams::zeros(d);
  if (classes.size() == 1) {
    const auto c = *classes.begin();
    fit.params.bias()[c] = 1.0;
    fit.warnings.push_back("degenerate fit: every label is " + std::string(to_string(kProficiencyOrder[c])) +
                           "; returning a constant predictor");
    return fit;
  }

  const double n = static_cast<double>(x.size());
  AdamState sw, sb;
  sw.resize(d * kProficiencyClasses);
  sb.resize(kProficiencyClasses);
  Matrix gw(d, kProficiencyClasses);
  std::vector<double> gb(kProficiencyClasses);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < config.probe_max_iters; ++it) {
    gw.fill(0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto z = probe_logits(x[i], fit.params);
      const double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (auto& v : z) {
        v = std::exp(v - zmax);
        sum += v;
      }
      for (auto& v : z) v /= sum;
      loss -= std::log(std::max(z[y[i]], 1e-300));
      z[y[i]] -= 1.0;
      for (std::size_t k = 0; k < d; ++k) {
        auto row = gw.row(k);
        for (std::size_t c = 0; c < kProficiencyClasses; ++c) row[c] += x[i][k] * z[c] / n;
      }
      for (std::size_t c = 0; c < kProficiencyClasses; ++c) gb[c] += z[c] / n;
    }
    loss /= n;
    if (!std::isfinite(loss)) throw NumericError("probe loss became non-finite at iteration " + std::to_string(it));
    fit.iterations = it + 1;
    fit.final_loss = loss;
    if (std::abs(prev - loss) < config.probe_tolerance * std::max(1.0, std::abs(prev))) break;
    prev = loss;
    adam_update(fit.params.weights().data(), gw.data(), sw, config.probe_lr);
    adam_update(fit.params.bias(), gb, sb, config.probe_lr);
  }
  return fit;
}

std::vector<double> pool_mapped_features(const FeatureSequence& seq, const MapperParams& mapper) {
  return mean_rows(map_features(seq, mapper));
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& dir, const StageModel& model, const TrainingConfig& config,
                     const CheckpointMeta& meta, const ProbeParams* probe) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "mapper.json", to_json(model.mapper).dump() + "\n");
  if (model.generator) write_file_atomic(dir / "adapters.json", model.generator->save_adapters().dump() + "\n");
  if (probe != nullptr) write_file_atomic(dir / "probe.json", to_json(*probe).dump() + "\n");
  write_file_atomic(dir / "config.txt", to_config(config).serialize());
  nlohmann::json j{{"stage", meta.stage},
                   {"embed_dim", meta.embed_dim},
                   {"feature_dim", meta.feature_dim},
                   {"generator_backend_id", meta.generator_backend_id},
                   {"base_fingerprint", meta.base_fingerprint},
                   {"split_hash", meta.split_hash},
                   {"vocabulary", meta.vocabulary},
                   {"loss_curve", meta.loss_curve},
                   {"no_two_stage", meta.no_two_stage}};
  write_file_atomic(dir / "meta.json", j.dump(1) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir, std::optional<std::size_t> expected_embed_dim) {
  if (!std::filesystem::exists(dir / "meta.json")) {
    throw InputError("not a checkpoint directory (missing meta.json): " + dir.string());
  }
  LoadedCheckpoint out;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "meta.json"));
    out.meta.stage = j.at("stage").get<std::string>();
    out.meta.embed_dim = j.at("embed_dim").get<std::size_t>();
    out.meta.feature_dim = j.at("feature_dim").get<std::size_t>();
    out.meta.generator_backend_id = j.at("generator_backend_id").get<std::string>();
    out.meta.base_fingerprint = j.at("base_fingerprint").get<std::string>();
    out.meta.split_hash = j.at("split_hash").get<std::string>();
    out.meta.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    out.meta.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    out.meta.no_two_stage = j.value("no_two_stage", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint metadata in " + dir.string(), e.what());
  }
  if (expected_embed_dim && *expected_embed_dim != out.meta.embed_dim) {
    throw ConfigError("checkpoint " + dir.string() + " has embed_dim " + std::to_string(out.meta.embed_dim) +
                      ", generator expects " + std::to_string(*expected_embed_dim));
  }
  out.config = training_config_from(Config::load(dir / "config.txt"), published_config());
  validate(out.config);
  if (out.config.embed_dim != out.meta.embed_dim) {
    throw ConfigError("checkpoint config and metadata disagree on embed_dim");
  }
  out.model.mapper = mapper_from_json(nlohmann::json::parse(read_file(dir / "mapper.json")));
  if (out.model.mapper.d_out() != out.meta.embed_dim) {
    throw ConfigError("checkpoint mapper output width " + std::to_string(out.model.mapper.d_out()) +
                      " does not match embed_dim " + std::to_string(out.meta.embed_dim));
  }
  if (!out.meta.vocabulary.empty() || std::filesystem::exists(dir / "adapters.json")) {
    auto gen = make_generator(out.config, Tokenizer(out.meta.vocabulary));
    if (gen->base_fingerprint() != out.meta.base_fingerprint) {
      throw ConfigError("rebuilt generator base weights do not match checkpoint " + dir.string());
    }
    if (std::filesystem::exists(dir / "adapters.json")) {
      gen->load_adapters(nlohmann::json::parse(read_file(dir / "adapters.json")));
    }
    gen->set_training(false);
    out.model.generator = std::move(gen);
  }
  if (std::filesystem::exists(dir / "probe.json")) {
    out.probe = probe_from_json(nlohmann::json::parse(read_file(dir / "probe.json")));
  }
  return out;
}

}  // namespace skillassess
