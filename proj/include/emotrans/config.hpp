#pragma once

// Declarative pipeline configuration: one JSON file, overridden by
// EMOTRANS_<SECTION>_<KEY> environment variables, overridden by --set flags.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emotrans/attributes.hpp"
#include "emotrans/core.hpp"
#include "emotrans/error.hpp"
#include "emotrans/rng.hpp"
#include "emotrans/speech.hpp"

namespace emotrans {

struct EndpointConfig {
  std::string endpoint;  // empty selects the deterministic fallback client
  double timeout_s = 30.0;

  bool operator==(const EndpointConfig&) const = default;
};

struct PipelineConfig {
  std::optional<std::uint64_t> seed;  // mandatory for every pipeline command
  std::string run_dir = "run";
  int parallelism = 1;
  bool offline = false;

  struct Paths {
    std::string manifests = "manifests.jsonl";
    std::string audio_dir = "audio";
    std::string trimmed_dir = "trimmed";
    std::string alignments = "alignments.jsonl";
    std::string checkpoint = "checkpoint.bin";
    std::string reports_dir = "reports";

    bool operator==(const Paths&) const = default;
  } paths;

  EndpointConfig textgen;
  int textgen_retry_limit = 3;
  EndpointConfig tts;
  EndpointConfig ser;
  EndpointConfig asr;
  EndpointConfig embedder;
  EndpointConfig feature;
  EndpointConfig caption;

  struct Dataset {
    int utterances = 60;
    int max_transitions = 3;
    int speakers = 4;
    std::string languages = "en,zh";  // comma-separated codes

    bool operator==(const Dataset&) const = default;
  } dataset;

  struct Audio {
    int sample_rate = 16000;
    double join_ramp_ms = 0.0;  // 0 disables the optional join ramp

    bool operator==(const Audio&) const = default;
  } audio;

  struct Vad {
    int frame_ms = 30;
    int aggressiveness = 2;
    int window_frames = 10;
    double trigger_ratio = 0.9;

    bool operator==(const Vad&) const = default;
  } vad;

  struct Mtetr {
    bool reduced = true;  // false trains the full-size model
    int epochs = 4;
    double lr = 1e-3;
    int median_frames = 25;
    double min_segment_s = 0.5;
    int eer_tolerance_frames = 5;

    bool operator==(const Mtetr&) const = default;
  } mtetr;

  struct Attributes {
    AttributeThresholds thresholds;
    std::string energy_mode = "tertiles";  // or "fixed"

    bool operator==(const Attributes&) const = default;
  } attributes;

  struct Captioning {
    int max_attempts = 3;

    bool operator==(const Captioning&) const = default;
  } captioning;

  struct Synthesis {
    int max_attempts = kDefaultMaxSynthesisAttempts;

    bool operator==(const Synthesis&) const = default;
  } synthesis;

  bool operator==(const PipelineConfig&) const = default;

  std::vector<Language> language_list() const {
    std::vector<Language> out;
    std::string token;
    std::istringstream is(dataset.languages);
    while (std::getline(is, token, ',')) {
      std::size_t a = token.find_first_not_of(" \t");
      if (a == std::string::npos) continue;
      std::size_t b = token.find_last_not_of(" \t");
      std::string code = token.substr(a, b - a + 1);
      try {
        out.push_back(parse_language_or_throw(code));
      } catch (const ValidationError&) {
        throw ConfigError("config: dataset.languages has unknown code '" + code + "'");
      }
    }
    if (out.empty()) throw ConfigError("config: dataset.languages lists no language");
    return out;
  }

  void validate() const {
    if (!seed.has_value()) throw ConfigError("config: seed is mandatory");
    if (run_dir.empty()) throw ConfigError("config: run_dir is empty");
    if (parallelism < 1) throw ConfigError("config: parallelism must be >= 1");
    for (const auto* p : {&paths.manifests, &paths.audio_dir, &paths.trimmed_dir,
                          &paths.alignments, &paths.checkpoint, &paths.reports_dir})
      if (p->empty()) throw ConfigError("config: empty path entry");
    for (const auto* e : {&textgen, &tts, &ser, &asr, &embedder, &feature, &caption})
      if (!(e->timeout_s > 0.0)) throw ConfigError("config: timeout_s must be > 0");
    if (textgen_retry_limit < 1) throw ConfigError("config: textgen.retry_limit must be >= 1");
    if (dataset.utterances < 1) throw ConfigError("config: dataset.utterances must be >= 1");
    if (dataset.max_transitions < 0)
      throw ConfigError("config: dataset.max_transitions must be >= 0");
    if (dataset.speakers < 1) throw ConfigError("config: dataset.speakers must be >= 1");
    language_list();
    if (audio.sample_rate < 1000) throw ConfigError("config: audio.sample_rate too low");
    if (audio.join_ramp_ms < 0.0) throw ConfigError("config: audio.join_ramp_ms < 0");
    if (vad.frame_ms != 10 && vad.frame_ms != 20 && vad.frame_ms != 30)
      throw ConfigError("config: vad.frame_ms must be 10, 20 or 30");
    if (vad.aggressiveness < 0 || vad.aggressiveness > 3)
      throw ConfigError("config: vad.aggressiveness must be in 0..3");
    if (vad.window_frames < 1) throw ConfigError("config: vad.window_frames must be >= 1");
    if (!(vad.trigger_ratio > 0.0) || vad.trigger_ratio > 1.0)
      throw ConfigError("config: vad.trigger_ratio must be in (0, 1]");
    if (mtetr.epochs < 1) throw ConfigError("config: mtetr.epochs must be >= 1");
    if (!(mtetr.lr > 0.0)) throw ConfigError("config: mtetr.lr must be > 0");
    if (mtetr.median_frames < 0) throw ConfigError("config: mtetr.median_frames < 0");
    if (mtetr.min_segment_s < 0.0) throw ConfigError("config: mtetr.min_segment_s < 0");
    if (mtetr.eer_tolerance_frames < 0)
      throw ConfigError("config: mtetr.eer_tolerance_frames < 0");
    attributes.thresholds.validate();
    if (attributes.energy_mode != "tertiles" && attributes.energy_mode != "fixed")
      throw ConfigError("config: attributes.energy_mode must be 'tertiles' or 'fixed'");
    if (captioning.max_attempts < 1)
      throw ConfigError("config: captioning.max_attempts must be >= 1");
    if (synthesis.max_attempts < 1)
      throw ConfigError("config: synthesis.max_attempts must be >= 1");
  }
};

namespace detail {

inline std::int64_t cfg_int(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw ConfigError("config: '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::uint64_t cfg_u64(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("config: '" + key + "' must be a non-negative integer");
}

inline double cfg_num(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return v.get<double>();
}

inline bool cfg_bool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config: '" + key + "' must be a boolean");
  return v.get<bool>();
}

inline std::string cfg_str(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  if (c.seed.has_value()) j["seed"] = *c.seed;
  j["run_dir"] = c.run_dir;
  j["parallelism"] = c.parallelism;
  j["offline"] = c.offline;
  j["paths"] = {{"manifests", c.paths.manifests},
                {"audio_dir", c.paths.audio_dir},
                {"trimmed_dir", c.paths.trimmed_dir},
                {"alignments", c.paths.alignments},
                {"checkpoint", c.paths.checkpoint},
                {"reports_dir", c.paths.reports_dir}};
  auto endpoint = [](const EndpointConfig& e) {
    return nlohmann::json{{"endpoint", e.endpoint}, {"timeout_s", e.timeout_s}};
  };
  j["textgen"] = endpoint(c.textgen);
  j["textgen"]["retry_limit"] = c.textgen_retry_limit;
  j["tts"] = endpoint(c.tts);
  j["ser"] = endpoint(c.ser);
  j["asr"] = endpoint(c.asr);
  j["embedder"] = endpoint(c.embedder);
  j["feature"] = endpoint(c.feature);
  j["caption"] = endpoint(c.caption);
  j["dataset"] = {{"utterances", c.dataset.utterances},
                  {"max_transitions", c.dataset.max_transitions},
                  {"speakers", c.dataset.speakers},
                  {"languages", c.dataset.languages}};
  j["audio"] = {{"sample_rate", c.audio.sample_rate},
                {"join_ramp_ms", c.audio.join_ramp_ms}};
  j["vad"] = {{"frame_ms", c.vad.frame_ms},
              {"aggressiveness", c.vad.aggressiveness},
              {"window_frames", c.vad.window_frames},
              {"trigger_ratio", c.vad.trigger_ratio}};
  j["mtetr"] = {{"reduced", c.mtetr.reduced},
                {"epochs", c.mtetr.epochs},
                {"lr", c.mtetr.lr},
                {"median_frames", c.mtetr.median_frames},
                {"min_segment_s", c.mtetr.min_segment_s},
                {"eer_tolerance_frames", c.mtetr.eer_tolerance_frames}};
  j["attributes"] = {{"pitch_low_hz", c.attributes.thresholds.pitch_low_hz},
                     {"pitch_high_hz", c.attributes.thresholds.pitch_high_hz},
                     {"energy_low_db", c.attributes.thresholds.energy_low_db},
                     {"energy_high_db", c.attributes.thresholds.energy_high_db},
                     {"speed_slow_en", c.attributes.thresholds.speed_slow_en},
                     {"speed_fast_en", c.attributes.thresholds.speed_fast_en},
                     {"speed_slow_zh", c.attributes.thresholds.speed_slow_zh},
                     {"speed_fast_zh", c.attributes.thresholds.speed_fast_zh},
                     {"energy_mode", c.attributes.energy_mode}};
  j["captioning"] = {{"max_attempts", c.captioning.max_attempts}};
  j["synthesis"] = {{"max_attempts", c.synthesis.max_attempts}};
  return j;
}

// Applies one dotted key. Unknown keys are configuration errors so typos
// fail loudly instead of silently running on defaults.
inline void apply_config_value(PipelineConfig& c, const std::string& key,
                               const nlohmann::json& v) {
  using detail::cfg_bool;
  using detail::cfg_int;
  using detail::cfg_num;
  using detail::cfg_str;
  using detail::cfg_u64;

  auto endpoint_key = [&](EndpointConfig& e, const std::string& field) {
    if (field == "endpoint") {
      e.endpoint = cfg_str(v, key);
    } else if (field == "timeout_s") {
      e.timeout_s = cfg_num(v, key);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  };

  if (key == "seed") {
    c.seed = cfg_u64(v, key);
  } else if (key == "run_dir") {
    c.run_dir = cfg_str(v, key);
  } else if (key == "parallelism") {
    c.parallelism = static_cast<int>(cfg_int(v, key));
  } else if (key == "offline") {
    c.offline = cfg_bool(v, key);
  } else if (key == "paths.manifests") {
    c.paths.manifests = cfg_str(v, key);
  } else if (key == "paths.audio_dir") {
    c.paths.audio_dir = cfg_str(v, key);
  } else if (key == "paths.trimmed_dir") {
    c.paths.trimmed_dir = cfg_str(v, key);
  } else if (key == "paths.alignments") {
    c.paths.alignments = cfg_str(v, key);
  } else if (key == "paths.checkpoint") {
    c.paths.checkpoint = cfg_str(v, key);
  } else if (key == "paths.reports_dir") {
    c.paths.reports_dir = cfg_str(v, key);
  } else if (key == "textgen.retry_limit") {
    c.textgen_retry_limit = static_cast<int>(cfg_int(v, key));
  } else if (key.rfind("textgen.", 0) == 0) {
    endpoint_key(c.textgen, key.substr(8));
  } else if (key.rfind("tts.", 0) == 0) {
    endpoint_key(c.tts, key.substr(4));
  } else if (key.rfind("ser.", 0) == 0) {
    endpoint_key(c.ser, key.substr(4));
  } else if (key.rfind("asr.", 0) == 0) {
    endpoint_key(c.asr, key.substr(4));
  } else if (key.rfind("embedder.", 0) == 0) {
    endpoint_key(c.embedder, key.substr(9));
  } else if (key.rfind("feature.", 0) == 0) {
    endpoint_key(c.feature, key.substr(8));
  } else if (key.rfind("caption.", 0) == 0) {
    endpoint_key(c.caption, key.substr(8));
  } else if (key == "dataset.utterances") {
    c.dataset.utterances = static_cast<int>(cfg_int(v, key));
  } else if (key == "dataset.max_transitions") {
    c.dataset.max_transitions = static_cast<int>(cfg_int(v, key));
  } else if (key == "dataset.speakers") {
    c.dataset.speakers = static_cast<int>(cfg_int(v, key));
  } else if (key == "dataset.languages") {
    c.dataset.languages = cfg_str(v, key);
  } else if (key == "audio.sample_rate") {
    c.audio.sample_rate = static_cast<int>(cfg_int(v, key));
  } else if (key == "audio.join_ramp_ms") {
    c.audio.join_ramp_ms = cfg_num(v, key);
  } else if (key == "vad.frame_ms") {
    c.vad.frame_ms = static_cast<int>(cfg_int(v, key));
  } else if (key == "vad.aggressiveness") {
    c.vad.aggressiveness = static_cast<int>(cfg_int(v, key));
  } else if (key == "vad.window_frames") {
    c.vad.window_frames = static_cast<int>(cfg_int(v, key));
  } else if (key == "vad.trigger_ratio") {
    c.vad.trigger_ratio = cfg_num(v, key);
  } else if (key == "mtetr.reduced") {
    c.mtetr.reduced = cfg_bool(v, key);
  } else if (key == "mtetr.epochs") {
    c.mtetr.epochs = static_cast<int>(cfg_int(v, key));
  } else if (key == "mtetr.lr") {
    c.mtetr.lr = cfg_num(v, key);
  } else if (key == "mtetr.median_frames") {
    c.mtetr.median_frames = static_cast<int>(cfg_int(v, key));
  } else if (key == "mtetr.min_segment_s") {
    c.mtetr.min_segment_s = cfg_num(v, key);
  } else if (key == "mtetr.eer_tolerance_frames") {
    c.mtetr.eer_tolerance_frames = static_cast<int>(cfg_int(v, key));
  } else if (key == "attributes.pitch_low_hz") {
    c.attributes.thresholds.pitch_low_hz = cfg_num(v, key);
  } else if (key == "attributes.pitch_high_hz") {
    c.attributes.thresholds.pitch_high_hz = cfg_num(v, key);
  } else if (key == "attributes.energy_low_db") {
    c.attributes.thresholds.energy_low_db = cfg_num(v, key);
  } else if (key == "attributes.energy_high_db") {
    c.attributes.thresholds.energy_high_db = cfg_num(v, key);
  } else if (key == "attributes.speed_slow_en") {
    c.attributes.thresholds.speed_slow_en = cfg_num(v, key);
  } else if (key == "attributes.speed_fast_en") {
    c.attributes.thresholds.speed_fast_en = cfg_num(v, key);
  } else if (key == "attributes.speed_slow_zh") {
    c.attributes.thresholds.speed_slow_zh = cfg_num(v, key);
  } else if (key == "attributes.speed_fast_zh") {
    c.attributes.thresholds.speed_fast_zh = cfg_num(v, key);
  } else if (key == "attributes.energy_mode") {
    c.attributes.energy_mode = cfg_str(v, key);
  } else if (key == "captioning.max_attempts") {
    c.captioning.max_attempts = static_cast<int>(cfg_int(v, key));
  } else if (key == "synthesis.max_attempts") {
    c.synthesis.max_attempts = static_cast<int>(cfg_int(v, key));
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

inline std::vector<std::string> config_key_names() {
  std::vector<std::string> names;
  PipelineConfig defaults;
  defaults.seed = 0;  // so the seed key is listed
  nlohmann::json j = config_to_json(defaults);
  for (const auto& [top, value] : j.items()) {
    if (value.is_object()) {
      for (const auto& [inner, iv] : value.items()) {
        (void)iv;
        names.push_back(top + "." + inner);
      }
    } else {
      names.push_back(top);
    }
  }
  return names;
}

inline PipelineConfig load_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  PipelineConfig c;
  for (const auto& [top, value] : j.items()) {
    if (value.is_object()) {
      for (const auto& [inner, iv] : value.items()) {
        if (iv.is_object() || iv.is_array())
          throw ConfigError("config: '" + top + "." + inner + "' must be a scalar");
        apply_config_value(c, top + "." + inner, iv);
      }
    } else if (value.is_array()) {
      throw ConfigError("config: '" + top + "' must not be an array");
    } else {
      apply_config_value(c, top, value);
    }
  }
  return c;
}

// Parses a string override (from --set or the environment) using the type of
// the key's current value.
inline void apply_string_override(PipelineConfig& c, const std::string& key,
                                  const std::string& text) {
  PipelineConfig probe = c;
  probe.seed = probe.seed.value_or(0);
  nlohmann::json j = config_to_json(probe);
  std::size_t dot = key.find('.');
  const nlohmann::json* slot = nullptr;
  if (dot == std::string::npos) {
    if (j.contains(key)) slot = &j.at(key);
  } else {
    std::string top = key.substr(0, dot);
    std::string inner = key.substr(dot + 1);
    if (j.contains(top) && j.at(top).is_object() && j.at(top).contains(inner))
      slot = &j.at(top).at(inner);
  }
  if (slot == nullptr) throw ConfigError("config: unknown key '" + key + "'");

  nlohmann::json parsed;
  try {
    if (slot->is_boolean()) {
      if (text == "true" || text == "1" || text == "yes" || text == "on")
        parsed = true;
      else if (text == "false" || text == "0" || text == "no" || text == "off")
        parsed = false;
      else
        throw ConfigError("config: '" + key + "' expects a boolean, got '" + text + "'");
    } else if (slot->is_number_unsigned()) {
      parsed = static_cast<std::uint64_t>(std::stoull(text));
    } else if (slot->is_number_integer()) {
      parsed = static_cast<std::int64_t>(std::stoll(text));
    } else if (slot->is_number_float()) {
      parsed = std::stod(text);
    } else {
      parsed = text;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config: cannot parse '" + text + "' for key '" + key + "'");
  }
  apply_config_value(c, key, parsed);
}

inline std::string env_name_for_key(const std::string& key) {
  std::string name = "EMOTRANS_";
  for (char ch : key)
    name += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

inline void apply_env_overrides(PipelineConfig& c) {
  for (const std::string& key : config_key_names()) {
    const char* value = std::getenv(env_name_for_key(key).c_str());
    if (value != nullptr) apply_string_override(c, key, value);
  }
}

// "section.key=value" from the command line.
inline void apply_assignment(PipelineConfig& c, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config: override must look like key=value, got '" + assignment + "'");
  apply_string_override(c, assignment.substr(0, eq), assignment.substr(eq + 1));
}

inline PipelineConfig load_config_file(const std::string& path,
                                       const std::vector<std::string>& assignments = {},
                                       bool use_env = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  PipelineConfig c = load_config(j);
  if (use_env) apply_env_overrides(c);
  for (const std::string& a : assignments) apply_assignment(c, a);
  return c;
}

inline std::string dump_config(const PipelineConfig& c) {
  return config_to_json(c).dump(2) + "\n";
}

// Stable fingerprint of the effective configuration, recorded in run metadata.
inline std::string config_hash(const PipelineConfig& c) {
  std::uint64_t h = fnv1a(config_to_json(c).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace emotrans
