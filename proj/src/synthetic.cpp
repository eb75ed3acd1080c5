// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "skillassess/common.hpp"
#include "skillassess/error.hpp"

namespace skillassess {

namespace {

const std::vector<std::string>& attribute_bank() {
  static const std::vector<std::string> kBank{
      "balance",        "footwork",          "timing",          "body posture",    "knee bend",
      "hand position",  "follow through",    "core stability",  "arm extension",   "head position",
      "hip rotation",   "grip strength",     "breathing rhythm", "landing control", "weight transfer",
      "shoulder alignment", "stride length", "elbow angle",     "wrist angle",     "back straightness",
      "pacing",         "reach",             "tempo",           "eye focus"};
  return kBank;
}

const std::vector<std::string>& sport_bank() {
  static const std::vector<std::string> kSports{"soccer", "basketball", "climbing", "dance", "tennis", "cooking"};
  return kSports;
}

struct Template {
  const char* prefix;
  const char* suffix;
};

constexpr Template kNegative[] = {{"Work on your ", "."}, {"Fix your ", "."}, {"You need better ", "."}};
constexpr Template kPositive[] = {{"Good ", "."}, {"Nice ", " here."}};

std::string sentence(const Template& t, const std::string& attr) { return t.prefix + attr + t.suffix; }

std::string cue(const Template& t, const std::string& attr) {
  std::string s = to_lower_ascii(t.prefix + attr + t.suffix);
  while (!s.empty() && (s.back() == '.' || s.back() == ' ')) s.pop_back();
  return s;
}

std::string padded(std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return buf;
}

}  // namespace

void validate(const SyntheticCorpusSpec& spec) {
  if (spec.sports.empty()) throw SpecError("synthetic spec declares no sports");
  std::set<std::string> sport_names, skill_names;
  for (const auto& sport : spec.sports) {
    if (trim(sport.name).empty()) throw SpecError("synthetic spec has a sport without a name");
    if (!sport_names.insert(sport.name).second) throw SpecError("duplicate sport " + sport.name);
    if (sport.skills.empty()) throw SpecError("sport " + sport.name + " has zero skills");
    for (const auto& skill : sport.skills) {
      if (trim(skill.name).empty()) throw SpecError("sport " + sport.name + " has a skill without a name");
      if (!skill_names.insert(skill.name).second) throw SpecError("duplicate skill " + skill.name);
      if (sport.common_attributes.size() + skill.attributes.size() == 0) {
        throw SpecError("skill " + skill.name + " has an empty attribute pool");
      }
    }
    for (const auto* list : {&sport.common_attributes}) {
      for (const auto& a : *list) {
        if (!is_canonical_attribute(a)) throw SpecError("attribute '" + a + "' is not canonical");
      }
    }
    for (const auto& skill : sport.skills) {
      for (const auto& a : skill.attributes) {
        if (!is_canonical_attribute(a)) throw SpecError("attribute '" + a + "' is not canonical");
      }
    }
  }
  if (spec.views.empty()) throw SpecError("synthetic spec needs at least one view");
  if (spec.samples_per_skill == 0) throw SpecError("samples_per_skill must be >= 1");
  if (spec.events_per_video == 0) throw SpecError("events_per_video must be >= 1");
  if (spec.min_attributes == 0 || spec.min_attributes > spec.max_attributes) {
    throw SpecError("need 1 <= min_attributes <= max_attributes");
  }
  if (!(spec.praise_probability >= 0.0 && spec.praise_probability <= 1.0)) {
    throw SpecError("praise_probability must be in [0, 1]");
  }
  if (!(spec.signal_strength >= 0.0 && spec.signal_strength <= 1.0)) {
    throw SpecError("signal_strength must be in [0, 1]");
  }
  if (spec.feature_dim == 0) throw SpecError("feature_dim must be >= 1");
}

nlohmann::json to_json(const SyntheticCorpusSpec& spec) {
  nlohmann::json sports = nlohmann::json::array();
  for (const auto& s : spec.sports) {
    nlohmann::json skills = nlohmann::json::array();
    for (const auto& k : s.skills) skills.push_back({{"name", k.name}, {"attributes", k.attributes}});
    sports.push_back({{"name", s.name}, {"common_attributes", s.common_attributes}, {"skills", skills}});
  }
  return {{"sports", sports},
          {"views", spec.views},
          {"samples_per_skill", spec.samples_per_skill},
          {"events_per_video", spec.events_per_video},
          {"min_attributes", spec.min_attributes},
          {"max_attributes", spec.max_attributes},
          {"praise_probability", spec.praise_probability},
          {"signal_strength", spec.signal_strength},
          {"feature_dim", spec.feature_dim},
          {"seed", spec.seed}};
}

SyntheticCorpusSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticCorpusSpec spec;
  try {
    for (const auto& s : j.at("sports")) {
      SyntheticSportSpec sport;
      sport.name = s.at("name").get<std::string>();
      sport.common_attributes = s.value("common_attributes", std::vector<std::string>{});
      for (const auto& k : s.value("skills", nlohmann::json::array())) {
        sport.skills.push_back({k.at("name").get<std::string>(), k.value("attributes", std::vector<std::string>{})});
      }
      spec.sports.push_back(std::move(sport));
    }
    spec.views = j.value("views", spec.views);
    spec.samples_per_skill = j.value("samples_per_skill", spec.samples_per_skill);
    spec.events_per_video = j.value("events_per_video", spec.events_per_video);
    spec.min_attributes = j.value("min_attributes", spec.min_attributes);
    spec.max_attributes = j.value("max_attributes", spec.max_attributes);
    spec.praise_probability = j.value("praise_probability", spec.praise_probability);
    spec.signal_strength = j.value("signal_strength", spec.signal_strength);
    spec.feature_dim = j.value("feature_dim", spec.feature_dim);
    spec.seed = j.value("seed", spec.seed);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed synthetic spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

SyntheticCorpusSpec make_overlap_spec(std::size_t n_sports, std::size_t n_skills, std::size_t samples_per_skill,
                                      double overlap, std::uint64_t seed) {
  if (n_sports == 0) throw SpecError("need at least one sport");
  if (n_skills == 0) throw SpecError("a sport with zero skills is degenerate");
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw SpecError("overlap must be in [0, 1]");
  constexpr std::size_t kCommon = 4;
  std::size_t cursor = 0;
  auto fresh = [&] {
    const auto& bank = attribute_bank();
    std::string a = cursor < bank.size() ? bank[cursor] : "trait " + std::to_string(cursor + 1);
    ++cursor;
    return a;
  };
  const auto shared_common = static_cast<std::size_t>(std::floor(overlap * kCommon + 0.5));
  const auto shared_slots = static_cast<std::size_t>(std::floor(overlap * static_cast<double>(n_skills) + 0.5));

  SyntheticCorpusSpec spec;
  spec.samples_per_skill = samples_per_skill;
  spec.seed = seed;
  std::vector<std::string> slot_attr(n_skills);
  for (std::size_t i = 0; i < n_sports; ++i) {
    SyntheticSportSpec sport;
    sport.name = i < sport_bank().size() ? sport_bank()[i] : "sport" + std::to_string(i + 1);
    for (std::size_t c = 0; c < kCommon; ++c) {
      sport.common_attributes.push_back(i > 0 && c < shared_common ? spec.sports[0].common_attributes[c] : fresh());
    }
    for (std::size_t k = 0; k < n_skills; ++k) {
      std::string attr;
      if (k < shared_slots) {
        if (slot_attr[k].empty()) slot_attr[k] = fresh();
        attr = slot_attr[k];
      } else {
        attr = fresh();
      }
      sport.skills.push_back({sport.name + "-s" + std::to_string(k + 1), {attr}});
    }
    spec.sports.push_back(std::move(sport));
  }
  validate(spec);
  return spec;
}

SyntheticCorpus gen_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  validate(spec);
  SyntheticCorpus out;
  out.encoder.seed = spec.seed;
  out.encoder.signal_strength = spec.signal_strength;
  out.encoder.feature_dim = spec.feature_dim;
  Rng rng(spec.seed ^ 0x73796e7468ULL);
  std::set<std::string> all_attributes;
  const double spacing = 30.0;

  for (const auto& sport : spec.sports) {
    for (const auto& skill : sport.skills) {
      std::set<std::string> pool_set(sport.common_attributes.begin(), sport.common_attributes.end());
      pool_set.insert(skill.attributes.begin(), skill.attributes.end());
      const std::vector<std::string> pool(pool_set.begin(), pool_set.end());
      all_attributes.insert(pool.begin(), pool.end());
      const std::size_t n_videos = (spec.samples_per_skill + spec.events_per_video - 1) / spec.events_per_video;
      std::size_t produced = 0;
      for (std::size_t v = 0; v < n_videos; ++v) {
        const std::string video_id = sport.name + "/" + skill.name + "/v" + padded(v, 3);
        const auto proficiency = kProficiencyOrder[rng.below(kProficiencyOrder.size())];
        const std::size_t events = std::min(spec.events_per_video, spec.samples_per_skill - produced);
        const double duration = spacing * static_cast<double>(events);
        for (std::size_t e = 0; e < events; ++e, ++produced) {
          const double ts = spacing / 2.0 + spacing * static_cast<double>(e);
          const std::size_t hi = std::min(spec.max_attributes, pool.size());
          const std::size_t lo = std::min(spec.min_attributes, hi);
          const std::size_t n = lo + rng.below(hi - lo + 1);
          std::vector<std::string> shuffled = pool;
          rng.shuffle(shuffled);
          std::vector<std::string> wrong(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n));
          // Sentences follow the attribute serialization order.
          std::sort(wrong.begin(), wrong.end(),
                    [](const std::string& a, const std::string& b) { return fnv1a64(a, 0) < fnv1a64(b, 0); });
          std::string text;
          for (const auto& a : wrong) {
            if (!text.empty()) text += ' ';
            text += sentence(kNegative[rng.below(std::size(kNegative))], a);
          }
          AttributeSet correct;
          if (n < shuffled.size() && rng.uniform() < spec.praise_probability) {
            const auto& a = shuffled[n + rng.below(shuffled.size() - n)];
            correct.insert(a);
            text += ' ' + sentence(kPositive[rng.below(std::size(kPositive))], a);
          }
          CommentaryRecord r;
          r.record_id = video_id + "/e" + std::to_string(e);
          r.video_id = video_id;
          r.timestamp_s = ts;
          r.text = text;
          r.sport = sport.name;
          r.skill = skill.name;
          r.views = spec.views;
          r.proficiency = proficiency;
          r.video_duration_s = duration;
          out.records.push_back(r);

          SkillAttributeAnnotation ann;
          ann.record_id = r.record_id;
          ann.correct_attributes = correct;
          ann.incorrect_attributes = AttributeSet(wrong.begin(), wrong.end());
          ann.backend_id = "planted";
          out.ledger.push_back(ann);

          out.events.push_back({video_id, ts, ann.incorrect_attributes, proficiency});
        }
      }
    }
  }
  for (const auto& a : all_attributes) {
    for (const auto& t : kNegative) out.rules.push_back({cue(t, a), a, true});
    for (const auto& t : kPositive) out.rules.push_back({cue(t, a), a, false});
  }
  return out;
}

nlohmann::json encoder_to_json(const SyntheticEncoderOptions& options, const std::vector<PlantedEvent>& events) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : events) {
    nlohmann::json j{{"video_id", e.video_id},
                     {"timestamp_s", e.timestamp_s},
                     {"attributes", std::vector<std::string>(e.attributes.begin(), e.attributes.end())}};
    if (e.proficiency) j["proficiency"] = std::string(to_string(*e.proficiency));
    ev.push_back(std::move(j));
  }
  return {{"backend", "synthetic"},
          {"seed", options.seed},
          {"signal_strength", options.signal_strength},
          {"feature_dim", options.feature_dim},
          {"noise_scale", options.noise_scale},
          {"event_radius_s", options.event_radius_s},
          {"events", ev}};
}

std::unique_ptr<SyntheticEncoder> load_synthetic_encoder(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    SyntheticEncoderOptions o;
    o.seed = j.at("seed").get<std::uint64_t>();
    o.signal_strength = j.at("signal_strength").get<double>();
    o.feature_dim = j.at("feature_dim").get<std::size_t>();
    o.noise_scale = j.value("noise_scale", o.noise_scale);
    o.event_radius_s = j.value("event_radius_s", o.event_radius_s);
    std::vector<PlantedEvent> events;
    for (const auto& e : j.at("events")) {
      PlantedEvent pe;
      pe.video_id = e.at("video_id").get<std::string>();
      pe.timestamp_s = e.at("timestamp_s").get<double>();
      for (const auto& a : e.at("attributes")) pe.attributes.insert(a.get<std::string>());
      if (e.contains("proficiency")) pe.proficiency = parse_proficiency(e["proficiency"].get<std::string>());
      events.push_back(std::move(pe));
    }
    return std::make_unique<SyntheticEncoder>(o, std::move(events));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("encoder", path.string() + ": " + e.what());
  }
}

void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpusSpec& spec,
                            const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "commentary.jsonl", serialize_corpus(corpus.records));
  write_file_atomic(dir / "ledger.jsonl", serialize_annotations(corpus.ledger));
  write_file_atomic(dir / "mock_rules.json", to_json(corpus.rules).dump(1) + "\n");
  write_file_atomic(dir / "encoder.json", encoder_to_json(corpus.encoder, corpus.events).dump(1) + "\n");
  write_file_atomic(dir / "spec.json", to_json(spec).dump(2) + "\n");
}

}  // namespace skillassess
