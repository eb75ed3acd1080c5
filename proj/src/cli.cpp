// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/cli.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "skillassess/commentary.hpp"
#include "skillassess/config.hpp"
#include "skillassess/dataset.hpp"
#include "skillassess/error.hpp"
#include "skillassess/evaluation.hpp"
#include "skillassess/extraction.hpp"
#include "skillassess/manifest.hpp"
#include "skillassess/pipeline.hpp"
#include "skillassess/report.hpp"
#include "skillassess/synthetic.hpp"
#include "skillassess/training.hpp"

namespace skillassess {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string out_dir;
  std::string manifest;
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out-dir", c.out_dir, "Output directory")->required();
  sub->add_option("--manifest", c.manifest, "Experiment manifest (default: <out-dir>/manifest.jsonl)");
  sub->add_option("--config", c.config, "Flat key = value config file");
}

Config load_config_file(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw InputError("missing input file: " + path);
  return Config::load(path);
}

// Value precedence: explicit flag, then config file, then the default.
template <typename T>
T pick(const CLI::Option* opt, const T& flag_value, const Config& cfg, const std::string& key, const T& fallback) {
  if (opt != nullptr && opt->count() > 0) return flag_value;
  if (!cfg.has(key)) return fallback;
  if constexpr (std::is_same_v<T, std::string>) {
    return cfg.get_string(key, fallback);
  } else if constexpr (std::is_same_v<T, double>) {
    return cfg.get_double(key, fallback);
  } else if constexpr (std::is_same_v<T, bool>) {
    return cfg.get_bool(key, fallback);
  } else {
    return static_cast<T>(cfg.get_uint(key, static_cast<std::uint64_t>(fallback)));
  }
}

std::string fmt(double v) { return format_fixed(v, 6); }

class StageRunner {
 public:
  StageRunner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  // Skips when the manifest holds an intact entry for the same inputs and
  // resolved configuration; otherwise runs `body`, writes the resolved
  // config and appends a manifest entry covering every output.
  void run(const std::string& stage, const Common& common, const std::vector<fs::path>& inputs, Config resolved,
           const std::function<std::vector<fs::path>(const fs::path&)>& body) {
    const fs::path out_dir(common.out_dir);
    resolved.set("out_dir", out_dir.lexically_normal().generic_string());
    const std::string snapshot = resolved.serialize();
    const auto input_hashes = hash_paths(inputs);
    const auto key = stage_key(stage, input_hashes, snapshot);
    ExperimentManifest manifest(common.manifest.empty() ? out_dir / "manifest.jsonl" : fs::path(common.manifest));
    if (manifest.up_to_date(key)) {
      out_ << stage << ": skipped (up-to-date)\n";
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    auto outputs = body(out_dir);
    const auto resolved_path = out_dir / "resolved_config.txt";
    write_file_atomic(resolved_path, snapshot);
    outputs.push_back(resolved_path);
    StageEntry entry;
    entry.stage = stage;
    entry.key = key;
    entry.inputs = input_hashes;
    entry.outputs = hash_paths(outputs);
    entry.config = snapshot;
    entry.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.append(entry);
    out_ << stage << ": wrote " << entry.outputs.size() << " file(s) to " << out_dir.generic_string() << "\n";
  }

  void warn(const std::string& msg) { err_ << "warning: " << msg << "\n"; }
  std::ostream& out() { return out_; }

 private:
  std::ostream& out_;
  std::ostream& err_;
};

std::unique_ptr<CompletionBackend> make_completion_backend(const std::string& spec) {
  if (spec.rfind("mock:", 0) == 0) {
    const std::string path = spec.substr(5);
    if (!fs::exists(path)) throw InputError("missing input file: " + path);
    return std::make_unique<RuleBasedMockBackend>(load_mock_rules(path));
  }
  if (spec.rfind("replay:", 0) == 0) {
    const std::string path = spec.substr(7);
    if (!fs::exists(path)) throw InputError("missing input file: " + path);
    return std::make_unique<ReplayBackend>(ReplayBackend::from_file(path));
  }
  if (spec == "http") return std::make_unique<HttpBackend>(HttpBackend::from_environment());
  throw ArgumentError("unknown extraction backend '" + spec + "' (expected mock:<rules>, replay:<cache> or http)");
}

std::vector<fs::path> backend_inputs(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return {};
  return {fs::path(spec.substr(colon + 1))};
}

std::unique_ptr<EncoderBackend> make_encoder(const std::string& spec) {
  if (spec.rfind("synthetic:", 0) == 0) {
    const std::string path = spec.substr(10);
    if (!fs::exists(path)) throw InputError("missing input file: " + path);
    return load_synthetic_encoder(path);
  }
  throw ArgumentError("unknown encoder '" + spec + "' (expected synthetic:<encoder.json>)");
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw InputError("missing input file: " + p.string());
}

struct SplitFiles {
  SplitManifest manifest;
  std::vector<ClipSample> train;
  std::vector<ClipSample> test;
};

SplitFiles load_split_dir(const fs::path& dir) {
  require_file(dir / "split.json");
  require_file(dir / "train.jsonl");
  require_file(dir / "test.jsonl");
  SplitFiles s;
  try {
    s.manifest = split_manifest_from_json(nlohmann::json::parse(read_file(dir / "split.json")));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("split", (dir / "split.json").string() + ": " + e.what());
  }
  verify(s.manifest);
  s.train = load_samples(dir / "train.jsonl");
  s.test = load_samples(dir / "test.jsonl");
  return s;
}

struct TrainingFlags {
  std::string preset = "toy";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
};

void add_training_flags(CLI::App* sub, TrainingFlags& t) {
  sub->add_option("--preset", t.preset, "Base hyperparameters: toy or published")->check(CLI::IsMember({"toy", "published"}));
  sub->add_option("--set", t.sets, "Override a config key (key=value), repeatable");
  t.seed_opt = sub->add_option("--seed", t.seed, "Training seed");
  t.epochs_opt = sub->add_option("--epochs", t.epochs, "Epoch budget");
}

TrainingConfig resolve_training(const TrainingFlags& t, const Config& file) {
  Config merged = to_config(preset_config(t.preset));
  merged.merge(file);
  for (const auto& kv : t.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + kv + "'");
    merged.set(trim(std::string_view(kv).substr(0, eq)), trim(std::string_view(kv).substr(eq + 1)));
  }
  if (t.seed_opt->count()) merged.set("seed", std::to_string(t.seed));
  if (t.epochs_opt->count()) merged.set("epochs", std::to_string(t.epochs));
  auto cfg = training_config_from(merged, preset_config(t.preset));
  validate(cfg);
  return cfg;
}

std::string loss_curve_csv(const TrainResult& r) {
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < r.loss_curve.size(); ++i) csv += std::to_string(i) + "," + fmt(r.loss_curve[i]) + "\n";
  return csv;
}

CheckpointMeta make_meta(const std::string& stage, const StageModel& model, const SplitFiles& split,
                         const TrainResult* result, bool no_two_stage) {
  CheckpointMeta m;
  m.stage = stage;
  m.embed_dim = model.generator ? model.generator->embed_dim() : model.mapper.d_out();
  m.feature_dim = model.mapper.d_in();
  if (model.generator) {
    m.generator_backend_id = model.generator->backend_id();
    m.base_fingerprint = model.generator->base_fingerprint();
    if (const auto* toy = dynamic_cast<const ToyDecoder*>(model.generator.get())) {
      m.vocabulary = toy->tokenizer().words();
    }
  }
  m.split_hash = split.manifest.content_hash;
  if (result) m.loss_curve = result->loss_curve;
  m.no_two_stage = no_two_stage;
  return m;
}

struct LoadedModels {
  std::optional<LoadedCheckpoint> stage1, stage2, probe;
};

LoadedModels load_models(const std::string& stage1, const std::string& stage2, const std::string& probe) {
  LoadedModels m;
  if (!stage1.empty()) m.stage1 = load_checkpoint(stage1);
  if (!stage2.empty()) {
    m.stage2 = load_checkpoint(stage2, m.stage1 ? std::optional<std::size_t>(m.stage1->meta.embed_dim) : std::nullopt);
  }
  if (!probe.empty()) {
    m.probe = load_checkpoint(probe);
    if (!m.probe->probe) throw InputError("checkpoint has no probe parameters: " + probe);
  }
  return m;
}

InferenceModels inference_models(const LoadedModels& lm, const TrainingConfig& base) {
  InferenceModels im;
  im.config = base;
  if (lm.stage1) {
    im.stage1 = &lm.stage1->model;
    im.config = lm.stage1->config;
  }
  if (lm.stage2) {
    im.stage2 = &lm.stage2->model;
    im.config = lm.stage2->config;
    im.config.no_two_stage = lm.stage2->meta.no_two_stage;
  }
  if (lm.probe) {
    im.probe = &*lm.probe->probe;
    im.probe_mapper = &lm.probe->model.mapper;
  }
  return im;
}

std::vector<fs::path> existing(const std::vector<std::string>& paths) {
  std::vector<fs::path> out;
  for (const auto& p : paths) {
    if (!p.empty()) out.emplace_back(p);
  }
  return out;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"skillassess: skill-attribute and feedback generation pipeline", "skillassess"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  StageRunner runner(out, err);

  // gen-synthetic
  Common gen_c;
  std::string gen_spec;
  std::size_t gen_sports = 2, gen_skills = 2, gen_samples = 25, gen_dim = 16;
  double gen_overlap = 0.5, gen_signal = 1.0;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic commentary corpus with planted labels");
  add_common(gen, gen_c);
  auto* gen_spec_opt = gen->add_option("--spec", gen_spec, "JSON corpus spec (overrides the layout flags)");
  auto* gen_sports_opt = gen->add_option("--sports", gen_sports, "Number of sports");
  auto* gen_skills_opt = gen->add_option("--skills", gen_skills, "Skills per sport");
  auto* gen_samples_opt = gen->add_option("--samples", gen_samples, "Records per skill");
  auto* gen_overlap_opt = gen->add_option("--overlap", gen_overlap, "Attribute vocabulary overlap in [0, 1]");
  auto* gen_signal_opt = gen->add_option("--signal-strength", gen_signal, "Planted feature signal in [0, 1]");
  auto* gen_dim_opt = gen->add_option("--feature-dim", gen_dim, "Per-view feature width");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Corpus seed");

  // extract
  Common ex_c;
  std::string ex_corpus, ex_backend;
  int ex_retries = 2;
  std::size_t ex_threads = 1;
  auto* ex = app.add_subcommand("extract", "Extract skill attributes from commentary");
  add_common(ex, ex_c);
  ex->add_option("--corpus", ex_corpus, "Commentary JSONL")->required();
  auto* ex_backend_opt = ex->add_option("--backend", ex_backend, "mock:<rules.json> | replay:<cache.jsonl> | http");
  auto* ex_retries_opt = ex->add_option("--retries", ex_retries, "Retries per record on malformed output");
  auto* ex_threads_opt = ex->add_option("--threads", ex_threads, "Concurrent requests");

  // build-dataset
  Common bd_c;
  std::string bd_corpus, bd_annotations, bd_encoder, bd_groups;
  double bd_mu1 = kDefaultMu1, bd_mu2 = kDefaultMu2;
  bool bd_keep_empty = false;
  auto* bd = app.add_subcommand("build-dataset", "Window clips, join annotations and cache features");
  add_common(bd, bd_c);
  bd->add_option("--corpus", bd_corpus, "Commentary JSONL")->required();
  bd->add_option("--annotations", bd_annotations, "Annotation JSONL")->required();
  auto* bd_encoder_opt = bd->add_option("--encoder", bd_encoder, "synthetic:<encoder.json>");
  auto* bd_mu1_opt = bd->add_option("--mu1", bd_mu1, "Seconds before the timestamp");
  auto* bd_mu2_opt = bd->add_option("--mu2", bd_mu2, "Seconds after the timestamp");
  auto* bd_keep_opt = bd->add_flag("--keep-empty", bd_keep_empty, "Keep samples with no incorrect attributes");
  bd->add_option("--skill-groups", bd_groups, "Skill-to-group JSON; replaces skill labels with groups");

  // split
  Common sp_c;
  std::string sp_dataset, sp_mode = "fs", sp_skill, sp_sport;
  double sp_fraction = 0.2;
  std::uint64_t sp_seed = 0;
  auto* sp = app.add_subcommand("split", "Build a train/test protocol split");
  add_common(sp, sp_c);
  sp->add_option("--dataset", sp_dataset, "Dataset directory")->required();
  auto* sp_mode_opt = sp->add_option("--mode", sp_mode, "fs | zs1 | zs2 | zs3");
  auto* sp_skill_opt = sp->add_option("--target-skill", sp_skill, "Held-out skill (zs1, zs2)");
  auto* sp_sport_opt = sp->add_option("--target-sport", sp_sport, "Held-out sport (zs3)");
  auto* sp_fraction_opt = sp->add_option("--holdout-fraction", sp_fraction, "FS test fraction of videos");
  auto* sp_seed_opt = sp->add_option("--seed", sp_seed, "Split seed");

  // train-stage1
  Common t1_c;
  TrainingFlags t1_t;
  std::string t1_dataset, t1_split;
  auto* t1 = app.add_subcommand("train-stage1", "Train the mapper and adapters to generate attribute sets");
  add_common(t1, t1_c);
  add_training_flags(t1, t1_t);
  t1->add_option("--dataset", t1_dataset, "Dataset directory")->required();
  t1->add_option("--split", t1_split, "Split directory")->required();

  // train-stage2
  Common t2_c;
  TrainingFlags t2_t;
  std::string t2_dataset, t2_split, t2_stage1;
  bool t2_no_two_stage = false;
  auto* t2 = app.add_subcommand("train-stage2", "Train attribute-conditioned feedback generation");
  add_common(t2, t2_c);
  add_training_flags(t2, t2_t);
  t2->add_option("--dataset", t2_dataset, "Dataset directory")->required();
  t2->add_option("--split", t2_split, "Split directory")->required();
  t2->add_option("--stage1", t2_stage1, "Stage 1 checkpoint directory");
  t2->add_flag("--no-two-stage", t2_no_two_stage, "Train without stage 1 conditioning");

  // probe
  Common pr_c;
  TrainingFlags pr_t;
  std::string pr_dataset, pr_split, pr_checkpoint;
  auto* pr = app.add_subcommand("probe", "Fit the proficiency linear probe on frozen mapped features");
  add_common(pr, pr_c);
  add_training_flags(pr, pr_t);
  pr->add_option("--dataset", pr_dataset, "Dataset directory")->required();
  pr->add_option("--split", pr_split, "Split directory")->required();
  pr->add_option("--checkpoint", pr_checkpoint, "Checkpoint whose mapper produces the features")->required();

  // infer
  Common in_c;
  std::string in_dataset, in_split, in_stage1, in_stage2, in_probe;
  double in_noise = 0.0;
  std::uint64_t in_noise_seed = 0;
  auto* in = app.add_subcommand("infer", "Generate predictions for the test split");
  add_common(in, in_c);
  in->add_option("--dataset", in_dataset, "Dataset directory")->required();
  in->add_option("--split", in_split, "Split directory")->required();
  in->add_option("--stage1", in_stage1, "Stage 1 checkpoint");
  in->add_option("--stage2", in_stage2, "Stage 2 checkpoint");
  in->add_option("--probe", in_probe, "Probe checkpoint");
  auto* in_noise_opt = in->add_option("--noise", in_noise, "Fraction of inferred attributes replaced before stage 2");
  auto* in_noise_seed_opt = in->add_option("--noise-seed", in_noise_seed, "Noise seed");

  // evaluate
  Common ev_c;
  std::string ev_split, ev_predictions, ev_dataset, ev_stage1, ev_stage2, ev_probe, ev_similarity = "exact", ev_scorer;
  std::vector<double> ev_thresholds{0.7, 1.0};
  auto* ev = app.add_subcommand("evaluate", "Score predictions against the test split");
  add_common(ev, ev_c);
  ev->add_option("--split", ev_split, "Split directory")->required();
  ev->add_option("--predictions", ev_predictions, "Prediction JSONL (otherwise inference runs here)");
  ev->add_option("--dataset", ev_dataset, "Dataset directory (needed when inferring)");
  ev->add_option("--stage1", ev_stage1, "Stage 1 checkpoint");
  ev->add_option("--stage2", ev_stage2, "Stage 2 checkpoint");
  ev->add_option("--probe", ev_probe, "Probe checkpoint");
  auto* ev_sim_opt = ev->add_option("--similarity", ev_similarity, "exact | replay:<pairs.jsonl>");
  ev->add_option("--scorer-replay", ev_scorer, "Recorded external meteor/bert scores");
  auto* ev_thr_opt = ev->add_option("--iou-thresholds", ev_thresholds, "IoU thresholds")->delimiter(',');

  // report
  Common rp_c;
  std::string rp_kind, rp_metric = "iou@0.70", rp_transfer, rp_annotations;
  std::vector<std::string> rp_reports, rp_labels;
  auto* rp = app.add_subcommand("report", "Emit CSV and SVG summaries");
  add_common(rp, rp_c);
  rp->add_option("--kind", rp_kind, "table | drop-curve | confusion | vocab-cloud-data")->required();
  rp->add_option("--reports", rp_reports, "report.json files")->delimiter(',');
  rp->add_option("--labels", rp_labels, "Method label per report (default: method)")->delimiter(',');
  rp->add_option("--metric", rp_metric, "Metric to chart");
  rp->add_option("--transfer", rp_transfer, "Transfer grid JSON {sports, cells:[{train,test,score}]}");
  rp->add_option("--annotations", rp_annotations, "Annotation JSONL for vocab-cloud-data");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitInput;
  }

  if (gen->parsed()) {
    const Config file = load_config_file(gen_c.config);
    SyntheticCorpusSpec spec;
    std::vector<fs::path> inputs = existing({gen_c.config});
    const std::string spec_path = pick<std::string>(gen_spec_opt, gen_spec, file, "spec", "");
    const auto seed = pick<std::uint64_t>(gen_seed_opt, gen_seed, file, "seed", 0);
    if (!spec_path.empty()) {
      require_file(spec_path);
      inputs.emplace_back(spec_path);
      try {
        spec = synthetic_spec_from_json(nlohmann::json::parse(read_file(spec_path)));
      } catch (const nlohmann::json::parse_error& e) {
        throw SpecError(spec_path + ": " + e.what());
      }
      if (gen_seed_opt->count() || file.has("seed")) spec.seed = seed;
    } else {
      spec = make_overlap_spec(pick<std::size_t>(gen_sports_opt, gen_sports, file, "sports", 2),
                               pick<std::size_t>(gen_skills_opt, gen_skills, file, "skills", 2),
                               pick<std::size_t>(gen_samples_opt, gen_samples, file, "samples", 25),
                               pick<double>(gen_overlap_opt, gen_overlap, file, "overlap", 0.5), seed);
    }
    if (gen_signal_opt->count() || file.has("signal_strength")) {
      spec.signal_strength = pick<double>(gen_signal_opt, gen_signal, file, "signal_strength", 1.0);
    }
    if (gen_dim_opt->count() || file.has("feature_dim")) {
      spec.feature_dim = pick<std::size_t>(gen_dim_opt, gen_dim, file, "feature_dim", 16);
    }
    validate(spec);
    Config resolved;
    resolved.set("spec", to_json(spec).dump());
    runner.run("gen-synthetic", gen_c, inputs, resolved, [&](const fs::path& dir) {
      const auto corpus = gen_synthetic_corpus(spec);
      write_synthetic_corpus(dir, spec, corpus);
      runner.out() << "gen-synthetic: " << corpus.records.size() << " records, " << corpus.ledger.size()
                   << " planted annotations\n";
      return std::vector<fs::path>{dir / "commentary.jsonl", dir / "ledger.jsonl", dir / "mock_rules.json",
                                   dir / "encoder.json", dir / "spec.json"};
    });
    return kExitOk;
  }

  if (ex->parsed()) {
    const Config file = load_config_file(ex_c.config);
    const auto backend_spec = pick<std::string>(ex_backend_opt, ex_backend, file, "extraction_backend", "");
    if (backend_spec.empty()) throw ArgumentError("extract needs --backend (or extraction_backend in --config)");
    const auto retries = pick<std::size_t>(ex_retries_opt, static_cast<std::size_t>(ex_retries), file, "retries", 2);
    const auto threads = pick<std::size_t>(ex_threads_opt, ex_threads, file, "threads", 1);
    require_file(ex_corpus);
    auto inputs = existing({ex_corpus, ex_c.config});
    for (const auto& p : backend_inputs(backend_spec)) {
      require_file(p);
      inputs.push_back(p);
    }
    Config resolved;
    resolved.set("backend", backend_spec.rfind("http", 0) == 0 ? "http" : backend_spec);
    resolved.set("retries", std::to_string(retries));
    runner.run("extract", ex_c, inputs, resolved, [&](const fs::path& dir) {
      const auto records = load_corpus(ex_corpus);
      auto backend = make_completion_backend(backend_spec);
      const auto result = extract_annotations(records, *backend, static_cast<int>(retries), threads);
      write_file_atomic(dir / "annotations.jsonl", serialize_annotations(result.annotations));
      std::string skipped;
      for (const auto& s : result.skipped) {
        skipped += nlohmann::json{{"record_id", s.record_id}, {"reason", s.reason}}.dump() + "\n";
        runner.warn("skipped " + s.record_id + ": " + s.reason);
      }
      write_file_atomic(dir / "skipped.jsonl", skipped);
      write_file_atomic(dir / "stats.json", to_json(corpus_statistics(records)).dump(2) + "\n");
      runner.out() << "extract: " << result.annotations.size() << " annotated, " << result.skipped.size()
                   << " skipped\n";
      return std::vector<fs::path>{dir / "annotations.jsonl", dir / "skipped.jsonl", dir / "stats.json"};
    });
    return kExitOk;
  }

  if (bd->parsed()) {
    const Config file = load_config_file(bd_c.config);
    const auto encoder_spec = pick<std::string>(bd_encoder_opt, bd_encoder, file, "encoder", "");
    if (encoder_spec.empty()) throw ArgumentError("build-dataset needs --encoder (or encoder in --config)");
    const double mu1 = pick<double>(bd_mu1_opt, bd_mu1, file, "mu1", kDefaultMu1);
    const double mu2 = pick<double>(bd_mu2_opt, bd_mu2, file, "mu2", kDefaultMu2);
    const bool keep_empty = pick<bool>(bd_keep_opt, bd_keep_empty, file, "keep_empty", false);
    require_file(bd_corpus);
    require_file(bd_annotations);
    auto inputs = existing({bd_corpus, bd_annotations, bd_c.config, bd_groups});
    for (const auto& p : backend_inputs(encoder_spec)) inputs.push_back(p);
    Config resolved;
    resolved.set("encoder", encoder_spec);
    resolved.set("mu1", fmt(mu1));
    resolved.set("mu2", fmt(mu2));
    resolved.set("keep_empty", keep_empty ? "true" : "false");
    runner.run("build-dataset", bd_c, inputs, resolved, [&](const fs::path& dir) {
      auto samples = build_samples(load_corpus(bd_corpus), load_annotations(bd_annotations), mu1, mu2, keep_empty);
      if (!bd_groups.empty()) samples = map_skill_groups(std::move(samples), load_skill_grouping(bd_groups));
      auto encoder = make_encoder(encoder_spec);
      DatasetInfo info;
      write_dataset(dir, samples, *encoder, &info);
      runner.out() << "build-dataset: " << info.sample_count << " samples, feature width " << info.feature_dim << "\n";
      return std::vector<fs::path>{dir / "samples.jsonl", dir / "features", dir / "dataset.json"};
    });
    return kExitOk;
  }

  if (sp->parsed()) {
    const Config file = load_config_file(sp_c.config);
    SplitSpec spec;
    spec.mode = parse_split_mode(pick<std::string>(sp_mode_opt, sp_mode, file, "mode", "fs"));
    const auto skill = pick<std::string>(sp_skill_opt, sp_skill, file, "target_skill", "");
    const auto sport = pick<std::string>(sp_sport_opt, sp_sport, file, "target_sport", "");
    if (!skill.empty()) spec.target_skill = skill;
    if (!sport.empty()) spec.target_sport = sport;
    spec.holdout_fraction = pick<double>(sp_fraction_opt, sp_fraction, file, "holdout_fraction", 0.2);
    spec.seed = pick<std::uint64_t>(sp_seed_opt, sp_seed, file, "seed", 0);
    validate(spec);
    const fs::path samples_path = fs::path(sp_dataset) / "samples.jsonl";
    require_file(samples_path);
    Config resolved;
    resolved.set("split_spec", to_json(spec).dump());
    runner.run("split", sp_c, existing({samples_path.string(), sp_c.config}), resolved, [&](const fs::path& dir) {
      const auto result = make_split(load_samples(samples_path), spec);
      for (const auto& w : result.warnings) runner.warn(w);
      const auto manifest = make_split_manifest(spec, result);
      write_file_atomic(dir / "split.json", to_json(manifest).dump(1) + "\n");
      write_file_atomic(dir / "train.jsonl", serialize_samples(result.train));
      write_file_atomic(dir / "test.jsonl", serialize_samples(result.test));
      runner.out() << "split " << to_string(spec.mode) << ": " << result.train.size() << " train, "
                   << result.test.size() << " test\n";
      return std::vector<fs::path>{dir / "split.json", dir / "train.jsonl", dir / "test.jsonl"};
    });
    return kExitOk;
  }

  if (t1->parsed()) {
    const Config file = load_config_file(t1_c.config);
    const auto cfg = resolve_training(t1_t, file);
    const fs::path dataset(t1_dataset), split_dir(t1_split);
    require_file(dataset / "dataset.json");
    auto inputs = existing({t1_c.config});
    inputs.push_back(dataset);
    inputs.push_back(split_dir / "split.json");
    inputs.push_back(split_dir / "train.jsonl");
    runner.run("train-stage1", t1_c, inputs, to_config(cfg), [&](const fs::path& dir) {
      const auto split = load_split_dir(split_dir);
      const auto info = load_dataset_info(dataset);
      const auto features = load_feature_table(dataset, split.train);
      auto model = init_stage_model(split.train, info.feature_dim, cfg);
      const auto result = train_stage1(split.train, features, model, cfg);
      save_checkpoint(dir, model, cfg, make_meta("stage1", model, split, &result, false));
      write_file_atomic(dir / "loss_curve.csv", loss_curve_csv(result));
      runner.out() << "train-stage1: " << result.steps << " steps, final epoch loss "
                   << fmt(result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back()) << "\n";
      return std::vector<fs::path>{dir / "mapper.json", dir / "adapters.json", dir / "config.txt", dir / "meta.json",
                                   dir / "loss_curve.csv"};
    });
    return kExitOk;
  }

  if (t2->parsed()) {
    const Config file = load_config_file(t2_c.config);
    auto cfg = resolve_training(t2_t, file);
    if (t2_no_two_stage) cfg.no_two_stage = true;
    if (!cfg.no_two_stage && t2_stage1.empty()) {
      throw ConfigError("train-stage2 needs --stage1 (or --no-two-stage)");
    }
    const fs::path dataset(t2_dataset), split_dir(t2_split);
    require_file(dataset / "dataset.json");
    auto inputs = existing({t2_c.config});
    inputs.push_back(dataset);
    inputs.push_back(split_dir / "split.json");
    inputs.push_back(split_dir / "train.jsonl");
    if (!cfg.no_two_stage) inputs.emplace_back(t2_stage1);
    runner.run("train-stage2", t2_c, inputs, to_config(cfg), [&](const fs::path& dir) {
      const auto split = load_split_dir(split_dir);
      const auto info = load_dataset_info(dataset);
      const auto features = load_feature_table(dataset, split.train);
      std::optional<LoadedCheckpoint> stage1;
      StageModel base;
      if (!cfg.no_two_stage) {
        stage1 = load_checkpoint(t2_stage1);
        if (stage1->meta.split_hash != split.manifest.content_hash) {
          runner.warn("stage 1 checkpoint was trained on a different split");
        }
      } else {
        base = init_stage_model(split.train, info.feature_dim, cfg);
      }
      const GeneratorBackend& base_gen = stage1 ? *stage1->model.generator : *base.generator;
      auto out2 = train_stage2(split.train, features, stage1 ? &stage1->model : nullptr, base_gen, cfg);
      save_checkpoint(dir, out2.model, cfg, make_meta("stage2", out2.model, split, &out2.result, cfg.no_two_stage));
      write_file_atomic(dir / "loss_curve.csv", loss_curve_csv(out2.result));
      runner.out() << "train-stage2: " << out2.result.steps << " steps, final epoch loss "
                   << fmt(out2.result.epoch_losses.empty() ? 0.0 : out2.result.epoch_losses.back()) << "\n";
      return std::vector<fs::path>{dir / "mapper.json", dir / "adapters.json", dir / "config.txt", dir / "meta.json",
                                   dir / "loss_curve.csv"};
    });
    return kExitOk;
  }

  if (pr->parsed()) {
    const Config file = load_config_file(pr_c.config);
    const auto cfg = resolve_training(pr_t, file);
    const fs::path dataset(pr_dataset), split_dir(pr_split);
    require_file(dataset / "dataset.json");
    auto inputs = existing({pr_c.config, pr_checkpoint});
    inputs.push_back(dataset);
    inputs.push_back(split_dir / "split.json");
    inputs.push_back(split_dir / "train.jsonl");
    runner.run("probe", pr_c, inputs, to_config(cfg), [&](const fs::path& dir) {
      const auto split = load_split_dir(split_dir);
      const auto ckpt = load_checkpoint(pr_checkpoint);
      std::vector<ClipSample> labeled;
      for (const auto& s : split.train) {
        if (s.proficiency) labeled.push_back(s);
      }
      if (labeled.empty()) throw ArgumentError("no training samples carry proficiency labels");
      const auto features = load_feature_table(dataset, labeled);
      std::vector<std::vector<double>> x;
      std::vector<Proficiency> y;
      for (const auto& s : labeled) {
        x.push_back(pool_mapped_features(features.at(s.sample_id), ckpt.model.mapper));
        y.push_back(*s.proficiency);
      }
      const auto fit = train_linear_probe(x, y, cfg);
      for (const auto& w : fit.warnings) runner.warn(w);
      std::vector<Proficiency> pred;
      for (const auto& row : x) pred.push_back(predict_proficiency(row, fit.params));
      StageModel holder(ckpt.model.mapper, nullptr);
      auto meta = make_meta("probe", holder, split, nullptr, false);
      meta.embed_dim = ckpt.meta.embed_dim;
      auto saved = ckpt.config;
      saved.probe_lr = cfg.probe_lr;
      saved.probe_max_iters = cfg.probe_max_iters;
      saved.probe_tolerance = cfg.probe_tolerance;
      save_checkpoint(dir, holder, saved, meta, &fit.params);
      const double acc = proficiency_accuracy(pred, y);
      write_file_atomic(dir / "probe_fit.json", nlohmann::json{{"train_accuracy", std::round(acc * 1e6) / 1e6},
                                                                {"iterations", fit.iterations},
                                                                {"train_samples", x.size()}}
                                                        .dump(1) +
                                                    "\n");
      runner.out() << "probe: train accuracy " << format_fixed(acc, 2) << " after " << fit.iterations
                   << " iterations\n";
      return std::vector<fs::path>{dir / "mapper.json", dir / "probe.json", dir / "config.txt", dir / "meta.json",
                                   dir / "probe_fit.json"};
    });
    return kExitOk;
  }

  auto predictions_for = [&](const fs::path& dataset, const SplitFiles& split, const std::string& s1,
                             const std::string& s2, const std::string& pb, double noise, std::uint64_t noise_seed) {
    if (s1.empty() && s2.empty() && pb.empty()) {
      throw ArgumentError("need at least one of --stage1, --stage2, --probe");
    }
    const auto lm = load_models(s1, s2, pb);
    auto im = inference_models(lm, toy_config());
    im.noise_fraction = noise;
    im.noise_seed = noise_seed;
    im.noise_vocabulary = attribute_vocabulary_of(split.train);
    if (noise > 0.0 && im.noise_vocabulary.empty()) throw ArgumentError("noise needs a non-empty attribute vocabulary");
    const auto features = load_feature_table(dataset, split.test);
    std::vector<std::string> warnings;
    auto preds = run_inference(split.test, features, im, &warnings);
    for (const auto& w : warnings) runner.warn(w);
    return preds;
  };

  if (in->parsed()) {
    const Config file = load_config_file(in_c.config);
    const double noise = pick<double>(in_noise_opt, in_noise, file, "noise", 0.0);
    const auto noise_seed = pick<std::uint64_t>(in_noise_seed_opt, in_noise_seed, file, "noise_seed", 0);
    const fs::path dataset(in_dataset), split_dir(in_split);
    require_file(dataset / "dataset.json");
    auto inputs = existing({in_c.config, in_stage1, in_stage2, in_probe});
    inputs.push_back(dataset);
    inputs.push_back(split_dir / "split.json");
    inputs.push_back(split_dir / "test.jsonl");
    Config resolved;
    resolved.set("noise", fmt(noise));
    resolved.set("noise_seed", std::to_string(noise_seed));
    runner.run("infer", in_c, inputs, resolved, [&](const fs::path& dir) {
      const auto split = load_split_dir(split_dir);
      const auto preds = predictions_for(dataset, split, in_stage1, in_stage2, in_probe, noise, noise_seed);
      write_file_atomic(dir / "predictions.jsonl", serialize_predictions(preds));
      runner.out() << "infer: " << preds.size() << " predictions\n";
      return std::vector<fs::path>{dir / "predictions.jsonl"};
    });
    return kExitOk;
  }

  if (ev->parsed()) {
    const Config file = load_config_file(ev_c.config);
    const auto sim_spec = pick<std::string>(ev_sim_opt, ev_similarity, file, "similarity", "exact");
    if (!ev_thr_opt->count() && file.has("iou_thresholds")) {
      ev_thresholds.clear();
      for (const auto& t : split(file.get_string("iou_thresholds", ""), ',')) ev_thresholds.push_back(std::stod(trim(t)));
    }
    const fs::path split_dir(ev_split);
    auto inputs = existing({ev_c.config, ev_predictions, ev_scorer});
    inputs.push_back(split_dir / "split.json");
    inputs.push_back(split_dir / "test.jsonl");
    if (ev_predictions.empty()) {
      if (ev_dataset.empty()) throw ArgumentError("evaluate without --predictions needs --dataset and checkpoints");
      inputs.emplace_back(ev_dataset);
      for (const auto& p : existing({ev_stage1, ev_stage2, ev_probe})) inputs.push_back(p);
    }
    for (const auto& p : backend_inputs(sim_spec)) inputs.push_back(p);
    Config resolved;
    resolved.set("similarity", sim_spec);
    std::vector<std::string> thr;
    for (double t : ev_thresholds) thr.push_back(fmt(t));
    resolved.set("iou_thresholds", join(thr, ","));
    runner.run("evaluate", ev_c, inputs, resolved, [&](const fs::path& dir) {
      const auto split = load_split_dir(split_dir);
      std::vector<fs::path> outputs;
      std::vector<Prediction> preds;
      if (!ev_predictions.empty()) {
        preds = load_predictions(ev_predictions);
      } else {
        preds = predictions_for(ev_dataset, split, ev_stage1, ev_stage2, ev_probe, 0.0, 0);
        write_file_atomic(dir / "predictions.jsonl", serialize_predictions(preds));
        outputs.push_back(dir / "predictions.jsonl");
      }
      const auto sim = make_similarity(sim_spec);
      std::optional<ReplayScorer> scorer;
      if (!ev_scorer.empty()) scorer = ReplayScorer::from_file(ev_scorer);
      EvalOptions opts;
      opts.iou_thresholds = ev_thresholds;
      opts.similarity = sim.get();
      opts.external_scorer = scorer ? &*scorer : nullptr;
      const auto report = evaluate_predictions(split.test, preds, split.manifest.content_hash,
                                               std::string(to_string(split.manifest.spec.mode)), opts);
      write_eval_report(dir, report);
      outputs.push_back(dir / "report.json");
      outputs.push_back(dir / "per_sample.csv");
      for (const auto& [k, v] : report.metrics) runner.out() << "  " << k << " = " << format_fixed(v, 2) << "\n";
      return outputs;
    });
    return kExitOk;
  }

  if (rp->parsed()) {
    const auto kind = parse_report_kind(rp_kind);
    auto inputs = existing({rp_c.config, rp_transfer, rp_annotations});
    for (const auto& r : rp_reports) {
      require_file(r);
      inputs.emplace_back(r);
    }
    Config resolved;
    resolved.set("kind", rp_kind);
    resolved.set("metric", rp_metric);
    resolved.set("labels", join(rp_labels, ","));
    runner.run("report", rp_c, inputs, resolved, [&](const fs::path& dir) {
      EmittedFiles files;
      if (kind == ReportKind::kTable || kind == ReportKind::kDropCurve) {
        if (rp_reports.empty()) throw ArgumentError("--reports is required for " + rp_kind);
        if (!rp_labels.empty() && rp_labels.size() != rp_reports.size()) {
          throw ArgumentError("--labels must match --reports one to one");
        }
        std::vector<LabeledReport> reports;
        for (std::size_t i = 0; i < rp_reports.size(); ++i) {
          reports.push_back({rp_labels.empty() ? "method" : rp_labels[i], load_eval_report(rp_reports[i])});
        }
        files = kind == ReportKind::kTable ? emit_table(reports, rp_metric, dir)
                                           : emit_drop_curve(reports, rp_metric, dir);
      } else if (kind == ReportKind::kConfusion) {
        if (!rp_transfer.empty()) {
          require_file(rp_transfer);
          const auto j = nlohmann::json::parse(read_file(rp_transfer));
          std::map<std::pair<std::string, std::string>, double> cells;
          for (const auto& c : j.at("cells")) {
            cells[{c.at("train").get<std::string>(), c.at("test").get<std::string>()}] = c.at("score").get<double>();
          }
          const auto tm = transfer_matrix(cells, j.value("sports", std::vector<std::string>{}));
          files = emit_confusion("transfer (rows: train sport, cols: test sport)", tm.labels, tm.labels, tm.values, dir);
        } else {
          if (rp_reports.size() != 1) throw ArgumentError("confusion needs --transfer or exactly one --reports file");
          const auto r = load_eval_report(rp_reports.front());
          if (r.confusion.empty()) throw ArgumentError("report has no proficiency confusion matrix");
          std::vector<std::string> labels;
          for (auto p : kProficiencyOrder) labels.emplace_back(to_string(p));
          Matrix m(labels.size(), labels.size());
          for (std::size_t i = 0; i < labels.size(); ++i) {
            for (std::size_t k = 0; k < labels.size(); ++k) m(i, k) = static_cast<double>(r.confusion[i][k]);
          }
          files = emit_confusion("proficiency (rows: true, cols: predicted)", labels, labels, m, dir);
        }
      } else {
        if (rp_annotations.empty()) throw ArgumentError("vocab-cloud-data needs --annotations");
        require_file(rp_annotations);
        files = emit_vocab_cloud_data(attribute_vocabulary(load_annotations(rp_annotations)).incorrect, dir);
      }
      std::vector<fs::path> outputs{files.csv};
      if (!files.svg.empty()) outputs.push_back(files.svg);
      runner.out() << "report: " << files.csv.generic_string() << "\n";
      return outputs;
    });
    return kExitOk;
  }
  return kExitInput;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace skillassess
