// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "skillassess/error.hpp"
#include "skillassess/training.hpp"
#include "test_util.hpp"

using namespace skillassess;

namespace {

const std::vector<std::string> kPool{"balance", "footwork", "hip rotation", "timing"};

TrainingConfig tiny_config() {
  auto c = toy_config();
  c.embed_dim = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.max_len = 128;
  c.lora_rank = 4;
  c.lora_alpha = 8;
  c.lora_dropout = 0.0;
  c.epochs = 3;
  c.seed = 5;
  return c;
}

struct Toy {
  std::vector<ClipSample> samples;
  FeatureTable features;
};

// Each attribute lights up one feature column.
Toy toy_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    AttributeSet attrs{kPool[i % kPool.size()]};
    if (i % 3 == 0) attrs.insert(kPool[(i + 1) % kPool.size()]);
    auto s = testing::make_sample("s" + std::to_string(i), "v" + std::to_string(i), "soccer", "dribbling",
                                  attrs);
    s.feedback_text = "work on your " + *attrs.begin();
    FeatureSequence f{s.sample_id, Matrix(4, 6), {{"ego", 6}}};
    for (auto& v : f.frames.data()) v = 0.1 * rng.normal();
    for (const auto& a : attrs) {
      const auto col = static_cast<std::size_t>(std::find(kPool.begin(), kPool.end(), a) - kPool.begin());
      for (std::size_t r = 0; r < 4; ++r) f.frames(r, col) += 1.0;
    }
    t.features.emplace(s.sample_id, std::move(f));
    t.samples.push_back(std::move(s));
  }
  return t;
}

StageModel fresh(const Toy& t, const TrainingConfig& c) { return init_stage_model(t.samples, 6, c); }

}  // namespace

TEST_CASE("prompt templates") {
  const auto p1 = build_stage1_prompt("basketball", 5);
  CHECK(p1 ==
        "<video> Here is a video of a person doing basketball. Highlight up to 5 key concept areas where the "
        "person can improve: ...");
  const auto p2 = build_stage2_prompt("soccer", {});
  CHECK(p2.find("(may contain mistakes): none.") != std::string::npos);
  CHECK(p2.rfind("<video> ", 0) == 0);
  const auto p3 = build_stage2_prompt("soccer", {"timing", "balance"});
  CHECK(p3.find(serialize_attributes({"timing", "balance"})) != std::string::npos);
  CHECK_THROWS_AS(build_stage1_prompt("soccer", 0), ArgumentError);
  CHECK_THROWS_AS(build_stage1_prompt(" ", 3), ArgumentError);
}

TEST_CASE("attribute serialization round trips through the parser") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = testing::random_attribute_set(rng, 6);
    const auto seed = rng.below(4);
    CHECK(parse_attribute_output(serialize_attributes(s, seed)) == s);
    CHECK(ordered_attributes(s, seed) == ordered_attributes(AttributeSet(s.rbegin(), s.rend()), seed));
  }
  CHECK(parse_attribute_list("Balance; timing, balance\n...;") == std::vector<std::string>{"balance", "timing"});
  CHECK(parse_attribute_list("").empty());
}

TEST_CASE("attribute noise") {
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g", "h"};
  const AttributeSet s{"a", "b", "c"};
  Rng rng(1);
  CHECK(inject_attribute_noise(s, 0.0, vocab, rng).set == s);
  for (double frac : {0.3, 0.5, 0.7, 1.0}) {
    const auto expected = static_cast<std::size_t>(std::floor(3 * frac + 0.5));
    for (int trial = 0; trial < 50; ++trial) {
      const auto r = inject_attribute_noise(s, frac, vocab, rng);
      std::size_t kept = 0;
      for (const auto& a : r.set) kept += s.contains(a);
      CHECK(kept == 3 - expected);
      CHECK(r.set.size() == 3);
      CHECK(r.warnings.empty());
    }
  }
  const auto small = inject_attribute_noise(s, 1.0, {"a", "b", "c", "z"}, rng);
  CHECK_FALSE(small.warnings.empty());
  CHECK(small.set == AttributeSet{"z"});
  CHECK_THROWS_AS(inject_attribute_noise(s, 1.5, vocab, rng), ArgumentError);
  CHECK_THROWS_AS(inject_attribute_noise(s, 0.5, {}, rng), ArgumentError);
}

TEST_CASE("linear probe") {
  Rng rng(8);
  std::vector<std::vector<double>> x;
  std::vector<Proficiency> y;
  for (std::size_t c = 0; c < 4; ++c) {
    for (int i = 0; i < 25; ++i) {
      std::vector<double> v(5);
      for (auto& e : v) e = 0.2 * rng.normal();
      v[c] += 3.0;
      x.push_back(v);
      y.push_back(kProficiencyOrder[c]);
    }
  }
  const auto config = toy_config();
  const auto fit = train_linear_probe(x, y, config);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(predict_proficiency(x[i], fit.params) == y[i]);

  SUBCASE("relabeling permutes predictions") {
    auto perm = [](Proficiency p) { return kProficiencyOrder[(static_cast<std::size_t>(p) + 1) % 4]; };
    std::vector<Proficiency> y2;
    for (auto p : y) y2.push_back(perm(p));
    const auto fit2 = train_linear_probe(x, y2, config);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(predict_proficiency(x[i], fit2.params) == perm(predict_proficiency(x[i], fit.params)));
    }
  }
  SUBCASE("zero probe predicts the first class") {
    CHECK(predict_proficiency(x[60], ProbeParams::zeros(5)) == Proficiency::kNovice);
  }
  SUBCASE("single class gives a constant predictor with a warning") {
    const auto one = train_linear_probe(x, std::vector<Proficiency>(x.size(), Proficiency::kLateExpert), config);
    CHECK_FALSE(one.warnings.empty());
    CHECK(predict_proficiency(x[0], one.params) == Proficiency::kLateExpert);
  }
  CHECK(probe_from_json(to_json(fit.params)) == fit.params);
  CHECK_THROWS_AS(ProbeParams(Matrix(5, 3), std::vector<double>(3)), ShapeError);
  CHECK_THROWS_AS(probe_logits(std::vector<double>(4), fit.params), ShapeError);
  CHECK_THROWS_AS(train_linear_probe(x, {}, config), ArgumentError);
}

TEST_CASE("training config") {
  auto c = toy_config();
  CHECK(training_config_from(to_config(c), published_config()) == c);
  CHECK(training_config_from(to_config(published_config()), toy_config()) == published_config());
  CHECK(preset_config("toy") == toy_config());
  const auto p = published_config();
  CHECK(p.lora_rank == 128);
  CHECK(p.lora_alpha == 256.0);
  CHECK(p.lora_dropout == 0.05);
  CHECK(p.lr_mapper == 2e-3);
  CHECK(p.lr_generator == 2e-4);
  CHECK(p.epochs == 2);
  c.lr_mapper = 0.0;
  CHECK_NOTHROW(validate(c));
  c.lr_mapper = -1e-3;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = toy_config();
  c.lora_dropout = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = toy_config();
  c.embed_dim = 33;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = toy_config();
  c.k_max_attributes = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("tokenizer") {
  const auto tok = Tokenizer::from_texts({"Keep your balance, always.", "<video> timing"});
  const auto ids = tok.encode("<video> keep your balance, always.");
  CHECK(ids.front() == Tokenizer::kVideo);
  CHECK(tok.decode(std::span<const int>(ids).subspan(1)) == "keep your balance, always.");
  CHECK(tok.encode("unseen")[0] == Tokenizer::kUnk);
  CHECK(Tokenizer(tok.words()).vocab() == tok.vocab());
}

TEST_CASE("visual-row gradient of the generator matches central differences") {
  const auto t = toy_data(4, 2);
  auto c = tiny_config();
  auto model = fresh(t, c);
  auto& gen = *model.generator;
  // Nonzero adapters so their paths are exercised.
  gen.set_training(true);
  const Matrix seed_rows = map_features(t.features.at("s0").frames, model.mapper);
  gen.forward_backward(seed_rows, build_stage1_prompt("soccer", 5), "balance");
  gen.apply_adapter_update(0.05);
  const std::string prompt = build_stage1_prompt("soccer", 5);
  const std::string target = "balance; footwork";
  Matrix rows = seed_rows;
  const auto lg = gen.forward_backward(rows, prompt, target);
  gen.zero_adapter_grads();
  CHECK(lg.loss == doctest::Approx(gen.loss(rows, prompt, target)).epsilon(1e-12));
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double keep = rows.data()[i];
    rows.data()[i] = keep + h;
    const double up = gen.loss(rows, prompt, target);
    rows.data()[i] = keep - h;
    const double down = gen.loss(rows, prompt, target);
    rows.data()[i] = keep;
    worst = std::max(worst, std::abs((up - down) / (2 * h) - lg.visual_grad.data()[i]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("stage I training") {
  const auto t = toy_data(12, 4);
  const auto c = tiny_config();

  SUBCASE("base stays frozen while adapters and mapper move") {
    auto model = fresh(t, c);
    const auto base = model.generator->base_fingerprint();
    const auto adapters = model.generator->save_adapters();
    const auto mapper = model.mapper;
    train_stage1(t.samples, t.features, model, c);
    CHECK(model.generator->base_fingerprint() == base);
    CHECK(model.generator->save_adapters() != adapters);
    CHECK_FALSE(model.mapper == mapper);
  }
  SUBCASE("zero learning rates leave every parameter untouched") {
    auto z = c;
    z.lr_mapper = 0.0;
    z.lr_generator = 0.0;
    auto model = fresh(t, z);
    const auto adapters = model.generator->save_adapters();
    const auto mapper = model.mapper;
    const auto r = train_stage1(t.samples, t.features, model, z);
    CHECK(r.steps == 3 * 3);
    CHECK(model.generator->save_adapters() == adapters);
    CHECK(model.mapper == mapper);
  }
  SUBCASE("same seed, same run") {
    auto a = fresh(t, c);
    auto b = fresh(t, c);
    const auto ra = train_stage1(t.samples, t.features, a, c);
    const auto rb = train_stage1(t.samples, t.features, b, c);
    CHECK(ra.loss_curve == rb.loss_curve);
    CHECK(a.mapper == b.mapper);
    CHECK(a.generator->save_adapters() == b.generator->save_adapters());
  }
  SUBCASE("bad inputs") {
    auto model = fresh(t, c);
    CHECK_THROWS_AS(train_stage1({}, t.features, model, c), ArgumentError);
    CHECK_THROWS_AS(train_stage1(t.samples, {}, model, c), ArgumentError);
    auto wrong = model;
    wrong.mapper = init_mapper(6, 8, 1);
    CHECK_THROWS_AS(train_stage1(t.samples, t.features, wrong, c), ShapeError);
  }
}

TEST_CASE("training reduces the loss and inference honors k") {
  const auto t = toy_data(50, 6);
  auto c = tiny_config();
  c.epochs = 12;
  auto model = fresh(t, c);
  const auto r = train_stage1(t.samples, t.features, model, c);
  REQUIRE(r.epoch_losses.size() == 12);
  CHECK(r.epoch_losses.back() < 0.85 * r.epoch_losses.front());
  for (std::size_t e = 1; e < r.epoch_losses.size(); ++e) CHECK(r.epoch_losses[e] < r.epoch_losses[e - 1]);
  for (const auto& s : t.samples) {
    for (std::size_t k : {1, 2}) {
      const auto inf = infer_attribute_list(s, t.features, model.mapper, *model.generator, k);
      CHECK(inf.attributes.size() <= k);
    }
  }
}

TEST_CASE("stage II and checkpoints") {
  const auto t = toy_data(12, 9);
  auto c = tiny_config();
  auto s1 = fresh(t, c);
  train_stage1(t.samples, t.features, s1, c);
  const auto& base = *fresh(t, c).generator;

  CHECK_THROWS_AS(train_stage2(t.samples, t.features, nullptr, base, c), ConfigError);
  auto out = train_stage2(t.samples, t.features, &s1, base, c);
  CHECK(out.model.generator->base_fingerprint() == s1.generator->base_fingerprint());
  const auto fb = infer_feedback(t.samples[0], t.features, &s1, out.model, c);
  CHECK(fb.s_hat.size() <= c.k_max_attributes);

  auto n = c;
  n.no_two_stage = true;
  const auto solo = train_stage2(t.samples, t.features, nullptr, base, n);
  CHECK(infer_feedback(t.samples[0], t.features, nullptr, solo.model, n).s_hat.empty());

  testing::TempDir dir("ckpt");
  CheckpointMeta meta;
  meta.stage = "stage2";
  meta.embed_dim = c.embed_dim;
  meta.feature_dim = 6;
  meta.base_fingerprint = out.model.generator->base_fingerprint();
  meta.vocabulary = dynamic_cast<const ToyDecoder&>(*out.model.generator).tokenizer().words();
  meta.loss_curve = out.result.loss_curve;
  const auto probe = ProbeParams::zeros(c.embed_dim);
  save_checkpoint(dir.path() / "s2", out.model, c, meta, &probe);
  const auto loaded = load_checkpoint(dir.path() / "s2", c.embed_dim);
  CHECK(loaded.config == c);
  CHECK(loaded.model.mapper == out.model.mapper);
  CHECK(loaded.meta.loss_curve == meta.loss_curve);
  REQUIRE(loaded.probe.has_value());
  CHECK(*loaded.probe == probe);
  CHECK(generate_feedback(t.samples[1], t.features, loaded.model, {"timing"}, c) ==
        generate_feedback(t.samples[1], t.features, out.model, {"timing"}, c));
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "s2", c.embed_dim * 2), ConfigError);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing"), InputError);

  auto other = c;
  other.base_seed = 99;
  save_checkpoint(dir.path() / "bad", out.model, other, meta);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad"), ConfigError);
}
