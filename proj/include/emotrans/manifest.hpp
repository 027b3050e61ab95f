#pragma once

// UTF-8 JSONL manifest persistence, one utterance per line. Top-level field
// names are a stable external interface: id, language, speaker_id, plan,
// sentences, discourse_audio_ref, captions, attributes, seed.

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emotrans/core.hpp"
#include "emotrans/error.hpp"

namespace emotrans {

using json = nlohmann::json;

inline json plan_to_json(const TransitionPlan& plan) {
  json arr = json::array();
  for (EmotionLabel e : plan.emotions) arr.push_back(emotion_name(e));
  return arr;
}

inline TransitionPlan plan_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError("manifest field '" + field + "' must be an array");
  TransitionPlan plan;
  for (const auto& v : j) plan.emotions.push_back(parse_emotion_or_throw(v.get<std::string>()));
  return plan;
}

inline json sentence_to_json(const SentenceRecord& s) {
  return json{{"text", s.text},
              {"emotion", emotion_name(s.emotion)},
              {"start_s", s.start_s},
              {"end_s", s.end_s},
              {"audio_ref", s.audio_ref}};
}

inline SentenceRecord sentence_from_json(const json& j) {
  SentenceRecord s;
  s.text = j.at("text").get<std::string>();
  s.emotion = parse_emotion_or_throw(j.at("emotion").get<std::string>());
  s.start_s = j.at("start_s").get<double>();
  s.end_s = j.at("end_s").get<double>();
  s.audio_ref = j.value("audio_ref", std::string{});
  return s;
}

inline json attributes_to_json(const AttributeSequence& a) {
  json segs = json::array();
  for (const auto& s : a.segments) {
    segs.push_back(json{{"pitch_hz", s.pitch_hz},
                        {"pitch_cat", level_name(s.pitch_cat)},
                        {"energy_db", s.energy_db},
                        {"energy_cat", level_name(s.energy_cat)},
                        {"speed_ups", s.speed_ups},
                        {"speed_cat", speed_name(s.speed_cat)},
                        {"emotion", emotion_name(s.emotion)},
                        {"start_s", s.start_s},
                        {"end_s", s.end_s},
                        {"transcript", s.transcript}});
  }
  return json{{"profile",
               json{{"gender", gender_name(a.profile.gender)},
                    {"age_bucket", age_bucket_name(a.profile.age_bucket)}}},
              {"segments", segs}};
}

inline LevelCategory parse_level_or_throw(const std::string& s) {
  if (s == "low") return LevelCategory::kLow;
  if (s == "medium") return LevelCategory::kMedium;
  if (s == "high") return LevelCategory::kHigh;
  throw ValidationError("unknown level category: '" + s + "'");
}

inline SpeedCategory parse_speed_or_throw(const std::string& s) {
  if (s == "slow") return SpeedCategory::kSlow;
  if (s == "medium") return SpeedCategory::kMedium;
  if (s == "fast") return SpeedCategory::kFast;
  throw ValidationError("unknown speed category: '" + s + "'");
}

inline AttributeSequence attributes_from_json(const json& j) {
  AttributeSequence a;
  if (j.contains("profile")) {
    const auto& p = j.at("profile");
    a.profile.gender = parse_gender_or_throw(p.value("gender", "unknown"));
    a.profile.age_bucket = parse_age_bucket_or_throw(p.value("age_bucket", "unknown"));
  }
  for (const auto& sj : j.value("segments", json::array())) {
    SegmentAttributes s;
    s.pitch_hz = sj.value("pitch_hz", 0.0);
    s.pitch_cat = parse_level_or_throw(sj.value("pitch_cat", "medium"));
    s.energy_db = sj.value("energy_db", -120.0);
    s.energy_cat = parse_level_or_throw(sj.value("energy_cat", "medium"));
    s.speed_ups = sj.value("speed_ups", 0.0);
    s.speed_cat = parse_speed_or_throw(sj.value("speed_cat", "medium"));
    s.emotion = parse_emotion_or_throw(sj.at("emotion").get<std::string>());
    s.start_s = sj.at("start_s").get<double>();
    s.end_s = sj.at("end_s").get<double>();
    s.transcript = sj.value("transcript", std::string{});
    a.segments.push_back(std::move(s));
  }
  return a;
}

inline constexpr const char* kManifestKnownFields[] = {
    "id",       "language", "speaker_id",          "plan",     "sentences",
    "captions", "attributes", "discourse_audio_ref", "seed"};

inline json manifest_to_json(const UtteranceManifest& m) {
  json j{{"id", m.id},
         {"language", language_code(m.language)},
         {"speaker_id", m.speaker_id},
         {"plan", plan_to_json(m.plan)},
         {"discourse_audio_ref", m.discourse_audio_ref},
         {"seed", m.seed}};
  json sents = json::array();
  for (const auto& s : m.sentences) sents.push_back(sentence_to_json(s));
  j["sentences"] = std::move(sents);
  if (m.captions) {
    j["captions"] = json{{"v_i", m.captions->v_i},
                         {"v_d", m.captions->v_d},
                         {"encoded_plan", plan_to_json(m.captions->encoded_plan)}};
  }
  if (m.attributes) j["attributes"] = attributes_to_json(*m.attributes);
  for (const auto& [key, raw] : m.extra_fields) j[key] = json::parse(raw);
  return j;
}

inline UtteranceManifest manifest_from_json(const json& j) {
  UtteranceManifest m;
  try {
    m.id = j.at("id").get<std::string>();
    m.language = parse_language_or_throw(j.at("language").get<std::string>());
    m.speaker_id = j.value("speaker_id", std::string{});
    m.plan = plan_from_json(j.at("plan"), "plan");
    for (const auto& sj : j.value("sentences", json::array())) {
      m.sentences.push_back(sentence_from_json(sj));
    }
    m.discourse_audio_ref = j.value("discourse_audio_ref", std::string{});
    if (j.contains("captions") && !j.at("captions").is_null()) {
      const auto& c = j.at("captions");
      CaptionRecord rec;
      rec.v_i = c.value("v_i", std::string{});
      rec.v_d = c.value("v_d", std::string{});
      rec.encoded_plan = plan_from_json(c.at("encoded_plan"), "captions.encoded_plan");
      m.captions = std::move(rec);
    }
    if (j.contains("attributes") && !j.at("attributes").is_null()) {
      m.attributes = attributes_from_json(j.at("attributes"));
    }
    m.seed = j.value("seed", std::int64_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest parse: ") + e.what());
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* f : kManifestKnownFields) {
      if (it.key() == f) { known = true; break; }
    }
    if (!known) m.extra_fields.emplace_back(it.key(), it.value().dump());
  }
  m.validate();
  return m;
}

inline std::string manifest_to_line(const UtteranceManifest& m) { return manifest_to_json(m).dump(); }

inline UtteranceManifest manifest_from_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest line is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

inline void write_manifests(std::ostream& out, const std::vector<UtteranceManifest>& manifests) {
  for (const auto& m : manifests) out << manifest_to_line(m) << '\n';
}

inline std::vector<UtteranceManifest> read_manifests(std::istream& in) {
  std::vector<UtteranceManifest> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(manifest_from_line(line));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void save_manifests(const std::string& path, const std::vector<UtteranceManifest>& manifests) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open manifest file for writing: " + path);
  write_manifests(f, manifests);
}

inline std::vector<UtteranceManifest> load_manifests(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open manifest file: " + path);
  return read_manifests(f);
}

}  // namespace emotrans
