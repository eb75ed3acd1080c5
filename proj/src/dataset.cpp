// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "skillassess/error.hpp"

namespace skillassess {

namespace {

std::vector<ClipSample> filter(const std::vector<ClipSample>& in, auto pred) {
  std::vector<ClipSample> out;
  for (const auto& s : in) {
    if (pred(s)) out.push_back(s);
  }
  return out;
}

// Removes from `train` any sample sharing a video with `test`.
void drop_shared_videos(std::vector<ClipSample>& train, const std::vector<ClipSample>& test) {
  std::unordered_set<std::string> test_videos;
  for (const auto& s : test) test_videos.insert(s.video_id);
  std::erase_if(train, [&](const ClipSample& s) { return test_videos.contains(s.video_id); });
}

void tag(std::vector<ClipSample>& v, const std::string& t) {
  for (auto& s : v) s.split_tags.insert(t);
}

SplitResult split_fs(const std::vector<ClipSample>& samples, const SplitSpec& spec) {
  // Stratum of a video = (sport, skill) of its first sample.
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> strata;
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.video_id).second) strata[{s.sport, s.skill}].push_back(s.video_id);
  }
  Rng rng(spec.seed);
  std::unordered_set<std::string> test_videos;
  for (auto& [key, videos] : strata) {
    std::sort(videos.begin(), videos.end());
    rng.shuffle(videos);
    const auto n = videos.size();
    auto n_test = static_cast<std::size_t>(std::llround(spec.holdout_fraction * static_cast<double>(n)));
    if (n >= 2) n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    if (n < 2) n_test = 0;
    for (std::size_t i = 0; i < n_test; ++i) test_videos.insert(videos[i]);
  }
  SplitResult r;
  for (const auto& s : samples) {
    (test_videos.contains(s.video_id) ? r.test : r.train).push_back(s);
  }
  return r;
}

}  // namespace

nlohmann::json to_json(const ClipSample& s) {
  return nlohmann::json{
      {"sample_id", s.sample_id},
      {"video_id", s.video_id},
      {"window_start_s", s.window_start_s},
      {"window_end_s", s.window_end_s},
      {"video_duration_s", s.video_duration_s},
      {"sport", s.sport},
      {"skill", s.skill},
      {"views", s.views},
      {"attributes", s.attributes},
      {"feedback_text", s.feedback_text},
      {"proficiency", s.proficiency ? nlohmann::json(std::string(to_string(*s.proficiency)))
                                    : nlohmann::json(nullptr)},
      {"split_tags", s.split_tags},
  };
}

ClipSample sample_from_json(const nlohmann::json& j) {
  ClipSample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.video_id = j.at("video_id").get<std::string>();
  s.window_start_s = j.at("window_start_s").get<double>();
  s.window_end_s = j.at("window_end_s").get<double>();
  s.video_duration_s = j.value("video_duration_s", s.window_end_s);
  s.sport = j.at("sport").get<std::string>();
  s.skill = j.value("skill", "");
  s.views = j.at("views").get<std::vector<std::string>>();
  for (const auto& a : j.at("attributes")) s.attributes.insert(a.get<std::string>());
  s.feedback_text = j.value("feedback_text", "");
  if (auto p = j.find("proficiency"); p != j.end() && !p->is_null()) {
    s.proficiency = parse_proficiency(p->get<std::string>());
    if (!s.proficiency) throw ValidationError("proficiency", "unknown class");
  }
  if (auto t = j.find("split_tags"); t != j.end()) {
    for (const auto& x : *t) s.split_tags.insert(x.get<std::string>());
  }
  if (!(s.window_start_s >= 0.0 && s.window_start_s < s.window_end_s &&
        s.window_end_s <= s.video_duration_s)) {
    throw ValidationError("window_start_s", "invalid window for sample " + s.sample_id);
  }
  return s;
}

std::vector<ClipSample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open samples: " + path.string());
  std::vector<ClipSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

std::string serialize_samples(const std::vector<ClipSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

Window window_clip(double t, double mu1, double mu2, double duration) {
  if (!(mu1 >= 0.0) || !(mu2 >= 0.0) || !(mu1 + mu2 > 0.0)) {
    throw ArgumentError("window_clip: margins must be >= 0 with a positive sum");
  }
  if (!(t >= 0.0) || t > duration) {
    throw ArgumentError("window_clip: timestamp outside [0, video_duration_s]");
  }
  const Window w{std::max(0.0, t - mu1), std::min(duration, t + mu2)};
  if (!(w.start_s < w.end_s)) {
    throw DegenerateWindowError("window_clip: zero-length window at t=" + std::to_string(t));
  }
  return w;
}

std::vector<ClipSample> build_samples(const std::vector<CommentaryRecord>& records,
                                      const std::vector<SkillAttributeAnnotation>& annotations,
                                      double mu1, double mu2, bool keep_empty) {
  std::unordered_map<std::string, const SkillAttributeAnnotation*> by_record;
  for (const auto& a : annotations) by_record[a.record_id] = &a;

  std::unordered_set<std::string> record_ids;
  for (const auto& r : records) record_ids.insert(r.record_id);
  std::vector<std::string> orphans;
  for (const auto& a : annotations) {
    if (!record_ids.contains(a.record_id)) orphans.push_back(a.record_id);
  }
  if (!orphans.empty()) {
    throw JoinError("annotations without matching record: " + join(orphans, ", "));
  }

  std::vector<ClipSample> out;
  for (const auto& r : records) {
    auto it = by_record.find(r.record_id);
    if (it == by_record.end()) continue;
    const auto& ann = *it->second;
    if (ann.incorrect_attributes.empty() && !keep_empty) continue;
    const Window w = window_clip(r.timestamp_s, mu1, mu2, r.video_duration_s);
    ClipSample s;
    s.sample_id = "clip:" + r.record_id;
    s.video_id = r.video_id;
    s.window_start_s = w.start_s;
    s.window_end_s = w.end_s;
    s.video_duration_s = r.video_duration_s;
    s.sport = r.sport;
    s.skill = r.skill;
    s.views = r.views;
    s.attributes = ann.incorrect_attributes;
    s.feedback_text = r.text;
    s.proficiency = r.proficiency;
    out.push_back(std::move(s));
  }
  return out;
}

std::string_view to_string(SplitMode m) {
  switch (m) {
    case SplitMode::kFS:
      return "FS";
    case SplitMode::kZS1:
      return "ZS1";
    case SplitMode::kZS2:
      return "ZS2";
    case SplitMode::kZS3:
      return "ZS3";
  }
  return "?";
}

SplitMode parse_split_mode(std::string_view s) {
  std::string t = to_lower_ascii(s);
  std::erase(t, '-');
  if (t == "fs") return SplitMode::kFS;
  if (t == "zs1") return SplitMode::kZS1;
  if (t == "zs2") return SplitMode::kZS2;
  if (t == "zs3") return SplitMode::kZS3;
  throw ArgumentError("unknown split mode '" + std::string(s) + "'");
}

void validate(const SplitSpec& spec) {
  switch (spec.mode) {
    case SplitMode::kFS:
      if (!(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0)) {
        throw ArgumentError("FS split requires holdout_fraction in (0, 1)");
      }
      break;
    case SplitMode::kZS1:
    case SplitMode::kZS2:
      if (!spec.target_skill || spec.target_skill->empty()) {
        throw ArgumentError(std::string(to_string(spec.mode)) + " split requires target_skill");
      }
      break;
    case SplitMode::kZS3:
      if (!spec.target_sport || spec.target_sport->empty()) {
        throw ArgumentError("ZS3 split requires target_sport");
      }
      break;
  }
}

nlohmann::json to_json(const SplitSpec& spec) {
  return nlohmann::json{
      {"mode", std::string(to_string(spec.mode))},
      {"target_skill", spec.target_skill ? nlohmann::json(*spec.target_skill) : nlohmann::json(nullptr)},
      {"target_sport", spec.target_sport ? nlohmann::json(*spec.target_sport) : nlohmann::json(nullptr)},
      {"holdout_fraction", spec.holdout_fraction},
      {"seed", spec.seed},
  };
}

SplitSpec split_spec_from_json(const nlohmann::json& j) {
  SplitSpec s;
  s.mode = parse_split_mode(j.at("mode").get<std::string>());
  if (j.contains("target_skill") && !j["target_skill"].is_null()) s.target_skill = j["target_skill"];
  if (j.contains("target_sport") && !j["target_sport"].is_null()) s.target_sport = j["target_sport"];
  s.holdout_fraction = j.value("holdout_fraction", 0.2);
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

SplitResult make_split(const std::vector<ClipSample>& samples, const SplitSpec& spec_in) {
  validate(spec_in);
  SplitSpec spec = spec_in;
  SplitResult r;

  if (spec.mode == SplitMode::kZS1 || spec.mode == SplitMode::kZS2) {
    const auto& skill = *spec.target_skill;
    std::set<std::string> sports_with_skill;
    for (const auto& s : samples) {
      if (!s.skill.empty() && s.skill == skill) sports_with_skill.insert(s.sport);
    }
    if (sports_with_skill.empty()) {
      // A sport without skill subclasses can only be held out as a whole.
      const bool skill_less_sport =
          std::any_of(samples.begin(), samples.end(), [&](const ClipSample& s) { return s.sport == skill; }) &&
          std::all_of(samples.begin(), samples.end(),
                      [&](const ClipSample& s) { return s.sport != skill || s.skill.empty(); });
      if (!skill_less_sport) throw LookupError("unknown target skill '" + skill + "'");
      r.warnings.push_back("target '" + skill + "' is a sport without skills; using ZS3 semantics");
      spec.mode = SplitMode::kZS3;
      spec.target_sport = skill;
    } else if (spec.mode == SplitMode::kZS2 && sports_with_skill.size() > 1) {
      throw LookupError("target skill '" + skill + "' is ambiguous across sports");
    }
  }

  switch (spec.mode) {
    case SplitMode::kFS: {
      auto fs = split_fs(samples, spec);
      r.train = std::move(fs.train);
      r.test = std::move(fs.test);
      break;
    }
    case SplitMode::kZS1: {
      const auto& skill = *spec.target_skill;
      r.test = filter(samples, [&](const ClipSample& s) { return s.skill == skill; });
      r.train = filter(samples, [&](const ClipSample& s) { return s.skill != skill; });
      break;
    }
    case SplitMode::kZS2: {
      const auto& skill = *spec.target_skill;
      std::string sport;
      for (const auto& s : samples) {
        if (s.skill == skill) sport = s.sport;
      }
      r.test = filter(samples, [&](const ClipSample& s) { return s.skill == skill; });
      r.train = filter(samples, [&](const ClipSample& s) { return s.sport == sport && s.skill != skill; });
      break;
    }
    case SplitMode::kZS3: {
      const auto& sport = *spec.target_sport;
      r.test = filter(samples, [&](const ClipSample& s) { return s.sport == sport; });
      if (r.test.empty()) throw LookupError("unknown target sport '" + sport + "'");
      r.train = filter(samples, [&](const ClipSample& s) { return s.sport != sport; });
      break;
    }
  }

  drop_shared_videos(r.train, r.test);
  if (r.train.empty()) throw SplitError(std::string(to_string(spec.mode)) + " split has an empty train side");
  if (r.test.empty()) throw SplitError(std::string(to_string(spec.mode)) + " split has an empty test side");
  const std::string mode = std::string(to_string(spec_in.mode));
  tag(r.train, mode + ":train");
  tag(r.test, mode + ":test");
  return r;
}

namespace {
std::string manifest_hash(const SplitSpec& spec, const std::vector<std::string>& train,
                          const std::vector<std::string>& test) {
  const nlohmann::json j{{"spec", to_json(spec)}, {"train_ids", train}, {"test_ids", test}};
  return sha256_hex(j.dump());
}
}  // namespace

SplitManifest make_split_manifest(const SplitSpec& spec, const SplitResult& split) {
  SplitManifest m;
  m.spec = spec;
  for (const auto& s : split.train) m.train_ids.push_back(s.sample_id);
  for (const auto& s : split.test) m.test_ids.push_back(s.sample_id);
  m.content_hash = manifest_hash(spec, m.train_ids, m.test_ids);
  return m;
}

nlohmann::json to_json(const SplitManifest& m) {
  return nlohmann::json{{"spec", to_json(m.spec)},
                        {"seed", m.spec.seed},
                        {"train_ids", m.train_ids},
                        {"test_ids", m.test_ids},
                        {"content_hash", m.content_hash}};
}

SplitManifest split_manifest_from_json(const nlohmann::json& j) {
  SplitManifest m;
  m.spec = split_spec_from_json(j.at("spec"));
  m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  m.content_hash = j.at("content_hash").get<std::string>();
  return m;
}

void verify(const SplitManifest& m) {
  if (manifest_hash(m.spec, m.train_ids, m.test_ids) != m.content_hash) {
    throw ValidationError("content_hash", "split manifest hash mismatch");
  }
}

const SkillGrouping& fitness_skill_groups() {
  static const SkillGrouping kGroups = [] {
    SkillGrouping g;
    const std::vector<std::pair<std::string, std::vector<std::string>>> buckets{
        {"stretches_mobility",
         {"quad stretch", "armcrosschest", "good morning beginner", "floor touches", "toe touchers"}},
        {"cardio_agility",
         {"high knees", "quick feet", "jumping jacks", "air jump rope", "butt kickers", "puddle jumps"}},
        {"leg_lower_body",
         {"squats", "squat jumps", "squat kicks", "walking lunges", "lunge jumps", "standing kicks"}},
        {"core_upper_body", {"plank taps", "moving plank", "pushups", "shoulder gators"}},
        {"full_body", {"boxing squat punches", "mountain climbers"}},
    };
    for (const auto& [group, skills] : buckets) {
      for (const auto& s : skills) g[s] = group;
    }
    return g;
  }();
  return kGroups;
}

SkillGrouping load_skill_grouping(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  SkillGrouping g;
  for (auto it = j.at("groups").begin(); it != j.at("groups").end(); ++it) {
    for (const auto& skill : it.value()) {
      auto [pos, inserted] = g.emplace(skill.get<std::string>(), it.key());
      if (!inserted) throw MappingError("skill '" + pos->first + "' appears in two groups");
    }
  }
  return g;
}

std::vector<ClipSample> map_skill_groups(std::vector<ClipSample> samples,
                                         const SkillGrouping& grouping, bool strict) {
  for (auto& s : samples) {
    auto it = grouping.find(s.skill);
    if (it != grouping.end()) {
      s.skill = it->second;
    } else if (strict) {
      throw MappingError("skill '" + s.skill + "' has no group");
    }
  }
  return samples;
}

}  // namespace skillassess
