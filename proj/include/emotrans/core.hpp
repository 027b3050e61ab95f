#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emotrans/error.hpp"

namespace emotrans {

// =============================================================================
// Emotions
// =============================================================================

// Alphabetical by canonical name; plan enumeration relies on this order.
enum class EmotionLabel : int {
  kAngry = 0,
  kHappy = 1,
  kNeutral = 2,
  kSad = 3,
  kSurprised = 4,
};

inline constexpr int kEmotionCount = 5;

inline constexpr std::array<EmotionLabel, kEmotionCount> all_emotions() {
  return {EmotionLabel::kAngry, EmotionLabel::kHappy, EmotionLabel::kNeutral,
          EmotionLabel::kSad, EmotionLabel::kSurprised};
}

// Canonical lowercase form used in files and wire formats.
inline const char* emotion_name(EmotionLabel e) {
  switch (e) {
    case EmotionLabel::kAngry:     return "angry";
    case EmotionLabel::kHappy:     return "happy";
    case EmotionLabel::kNeutral:   return "neutral";
    case EmotionLabel::kSad:       return "sad";
    case EmotionLabel::kSurprised: return "surprised";
  }
  return "unknown";
}

// Presentation form used inside annotation strings ("sad" is rendered as
// "Sadness", everything else as the capitalized adjective).
inline const char* emotion_display_name(EmotionLabel e) {
  switch (e) {
    case EmotionLabel::kAngry:     return "Angry";
    case EmotionLabel::kHappy:     return "Happy";
    case EmotionLabel::kNeutral:   return "Neutral";
    case EmotionLabel::kSad:       return "Sadness";
    case EmotionLabel::kSurprised: return "Surprised";
  }
  return "Unknown";
}

inline std::optional<EmotionLabel> parse_emotion(std::string_view name) {
  for (EmotionLabel e : all_emotions()) {
    if (name == emotion_name(e)) return e;
  }
  return std::nullopt;
}

inline EmotionLabel parse_emotion_or_throw(std::string_view name) {
  auto e = parse_emotion(name);
  if (!e) throw ValidationError("unknown emotion label: '" + std::string(name) + "'");
  return *e;
}

// =============================================================================
// Languages
// =============================================================================

enum class Language { kEn, kZh };

inline const char* language_code(Language l) { return l == Language::kEn ? "en" : "zh"; }

inline Language parse_language_or_throw(std::string_view code) {
  if (code == "en") return Language::kEn;
  if (code == "zh") return Language::kZh;
  throw ValidationError("unknown language code: '" + std::string(code) + "'");
}

// =============================================================================
// Transition plans
// =============================================================================

// Ordered emotion sequence of one discourse; k transitions == k+1 entries.
// Adjacent entries are always distinct.
struct TransitionPlan {
  std::vector<EmotionLabel> emotions;

  int transition_count() const { return static_cast<int>(emotions.size()) - 1; }

  bool operator==(const TransitionPlan&) const = default;

  void validate() const {
    if (emotions.empty()) throw ValidationError("plan: emotion sequence is empty");
    for (std::size_t i = 1; i < emotions.size(); ++i) {
      if (emotions[i] == emotions[i - 1]) {
        throw ValidationError(std::string("plan: adjacent duplicate emotion '") +
                              emotion_name(emotions[i]) + "' at position " + std::to_string(i));
      }
    }
  }

  static TransitionPlan of(std::initializer_list<EmotionLabel> seq) {
    TransitionPlan p{std::vector<EmotionLabel>(seq)};
    p.validate();
    return p;
  }
};

// Collapses adjacent duplicates; maps a sentence emotion sequence onto the
// plan it realizes.
inline std::vector<EmotionLabel> collapse_adjacent(const std::vector<EmotionLabel>& seq) {
  std::vector<EmotionLabel> out;
  for (EmotionLabel e : seq) {
    if (out.empty() || out.back() != e) out.push_back(e);
  }
  return out;
}

// =============================================================================
// Timed segments
// =============================================================================

// (start, end, emotion) in seconds; the interchange unit between diarization,
// attribute analysis, captioning and metrics.
struct TimedSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  EmotionLabel emotion = EmotionLabel::kNeutral;

  double duration_s() const { return end_s - start_s; }

  bool operator==(const TimedSegment&) const = default;

  void validate() const {
    if (!(start_s >= 0.0)) throw ValidationError("segment: start_s must be >= 0");
    if (!(end_s > start_s)) throw ValidationError("segment: end_s must be > start_s");
  }
};

// Sorted, non-overlapping, adjacent emotions distinct.
inline void validate_segment_list(const std::vector<TimedSegment>& segs, double tol = 1e-9) {
  for (std::size_t i = 0; i < segs.size(); ++i) {
    segs[i].validate();
    if (i > 0) {
      if (segs[i].start_s < segs[i - 1].end_s - tol) {
        throw ValidationError("segment list: overlap at index " + std::to_string(i));
      }
      if (segs[i].emotion == segs[i - 1].emotion) {
        throw ValidationError("segment list: adjacent segments share emotion at index " +
                              std::to_string(i));
      }
    }
  }
}

inline TransitionPlan plan_of_segments(const std::vector<TimedSegment>& segs) {
  TransitionPlan p;
  for (const auto& s : segs) p.emotions.push_back(s.emotion);
  return p;
}

// =============================================================================
// Timestamp formatting
// =============================================================================

// Zero-padded "MM:SS", flooring to whole seconds. Valid for 0 <= t < 3600.
inline std::string format_timestamp(double t) {
  if (!(t >= 0.0) || t >= 3600.0) {
    throw RangeError("format_timestamp: t out of range [0, 3600): " + std::to_string(t));
  }
  int total = static_cast<int>(std::floor(t));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d:%02d", total / 60, total % 60);
  return buf;
}

// Parses "MM:SS" back to seconds; rejects malformed strings.
inline double parse_timestamp(std::string_view s) {
  if (s.size() != 5 || s[2] != ':' || !std::isdigit((unsigned char)s[0]) ||
      !std::isdigit((unsigned char)s[1]) || !std::isdigit((unsigned char)s[3]) ||
      !std::isdigit((unsigned char)s[4])) {
    throw ParseError("parse_timestamp: malformed timestamp '" + std::string(s) + "'");
  }
  int mm = (s[0] - '0') * 10 + (s[1] - '0');
  int ss = (s[3] - '0') * 10 + (s[4] - '0');
  if (ss >= 60) throw ParseError("parse_timestamp: seconds field >= 60 in '" + std::string(s) + "'");
  return mm * 60 + ss;
}

// =============================================================================
// Speaker profile and acoustic attributes
// =============================================================================

enum class Gender { kMale, kFemale, kUnknown };

inline const char* gender_name(Gender g) {
  switch (g) {
    case Gender::kMale:   return "male";
    case Gender::kFemale: return "female";
    case Gender::kUnknown: return "unknown";
  }
  return "unknown";
}

inline Gender parse_gender_or_throw(std::string_view s) {
  if (s == "male") return Gender::kMale;
  if (s == "female") return Gender::kFemale;
  if (s == "unknown") return Gender::kUnknown;
  throw ValidationError("unknown gender: '" + std::string(s) + "'");
}

// Ordinal age buckets; kUnknownAge means the manifest carried no metadata and
// no classifier was configured.
enum class AgeBucket : int {
  kChild = 0,
  kTeenager = 1,
  kYoungAdult = 2,
  kMiddleAged = 3,
  kElderly = 4,
  kUnknownAge = 5,
};

inline const char* age_bucket_name(AgeBucket a) {
  switch (a) {
    case AgeBucket::kChild:      return "child";
    case AgeBucket::kTeenager:   return "teenager";
    case AgeBucket::kYoungAdult: return "young-adult";
    case AgeBucket::kMiddleAged: return "middle-aged";
    case AgeBucket::kElderly:    return "elderly";
    case AgeBucket::kUnknownAge: return "unknown";
  }
  return "unknown";
}

inline AgeBucket parse_age_bucket_or_throw(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(AgeBucket::kUnknownAge); ++i) {
    auto a = static_cast<AgeBucket>(i);
    if (s == age_bucket_name(a)) return a;
  }
  throw ValidationError("unknown age bucket: '" + std::string(s) + "'");
}

struct SpeakerProfile {
  Gender gender = Gender::kUnknown;
  AgeBucket age_bucket = AgeBucket::kUnknownAge;

  bool operator==(const SpeakerProfile&) const = default;

  bool empty() const {
    return gender == Gender::kUnknown && age_bucket == AgeBucket::kUnknownAge;
  }
};

enum class LevelCategory { kLow, kMedium, kHigh };

inline const char* level_name(LevelCategory c) {
  switch (c) {
    case LevelCategory::kLow:    return "low";
    case LevelCategory::kMedium: return "medium";
    case LevelCategory::kHigh:   return "high";
  }
  return "medium";
}

enum class SpeedCategory { kSlow, kMedium, kFast };

inline const char* speed_name(SpeedCategory c) {
  switch (c) {
    case SpeedCategory::kSlow:   return "slow";
    case SpeedCategory::kMedium: return "medium";
    case SpeedCategory::kFast:   return "fast";
  }
  return "medium";
}

// Per-segment speaking-style analysis aligned with one emotion segment.
struct SegmentAttributes {
  double pitch_hz = 0.0;           // mean F0 over voiced frames; 0 when unvoiced
  LevelCategory pitch_cat = LevelCategory::kMedium;
  double energy_db = -120.0;       // mean RMS in dBFS
  LevelCategory energy_cat = LevelCategory::kMedium;
  double speed_ups = 0.0;          // text units per second (words en, chars zh)
  SpeedCategory speed_cat = SpeedCategory::kMedium;
  EmotionLabel emotion = EmotionLabel::kNeutral;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string transcript;

  bool operator==(const SegmentAttributes&) const = default;
};

// Profile plus the time-ordered attribute segments of one discourse.
struct AttributeSequence {
  SpeakerProfile profile;
  std::vector<SegmentAttributes> segments;

  bool operator==(const AttributeSequence&) const = default;

  TransitionPlan plan() const {
    TransitionPlan p;
    for (const auto& s : segments) p.emotions.push_back(s.emotion);
    return p;
  }
};

// =============================================================================
// Captions and manifests
// =============================================================================

// v_i: instructional (one line per segment); v_d: descriptive (global +
// per-part). encoded_plan is the transition plan both texts express.
struct CaptionRecord {
  std::string v_i;
  std::string v_d;
  TransitionPlan encoded_plan;

  bool operator==(const CaptionRecord&) const = default;

  void validate() const { encoded_plan.validate(); }
};

struct SentenceRecord {
  std::string text;
  EmotionLabel emotion = EmotionLabel::kNeutral;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string audio_ref;

  bool operator==(const SentenceRecord&) const = default;

  void validate() const {
    if (text.empty()) throw ValidationError("sentence: text is empty");
    if (!(end_s > start_s)) throw ValidationError("sentence: end_s must be > start_s");
    if (!(start_s >= 0.0)) throw ValidationError("sentence: start_s must be >= 0");
  }
};

// Persistent record of one discourse-level utterance.
struct UtteranceManifest {
  std::string id;
  Language language = Language::kEn;
  std::string speaker_id;
  TransitionPlan plan;
  std::vector<SentenceRecord> sentences;
  std::string discourse_audio_ref;
  std::optional<CaptionRecord> captions;
  std::optional<AttributeSequence> attributes;
  std::int64_t seed = 0;
  // Unknown top-level fields seen on load, kept as (key, raw JSON text) so a
  // read-modify-write cycle never drops them.
  std::vector<std::pair<std::string, std::string>> extra_fields;

  bool operator==(const UtteranceManifest&) const = default;

  double duration_s() const { return sentences.empty() ? 0.0 : sentences.back().end_s; }

  // Sentence segments on the discourse timeline, adjacent duplicates merged.
  std::vector<TimedSegment> segments() const {
    std::vector<TimedSegment> out;
    for (const auto& s : sentences) {
      if (!out.empty() && out.back().emotion == s.emotion) {
        out.back().end_s = s.end_s;
      } else {
        out.push_back({s.start_s, s.end_s, s.emotion});
      }
    }
    return out;
  }

  void validate(double tol = 1e-6) const {
    if (id.empty()) throw ValidationError("manifest: id is empty");
    plan.validate();
    std::vector<EmotionLabel> seq;
    double cursor = 0.0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      sentences[i].validate();
      if (std::abs(sentences[i].start_s - cursor) > tol) {
        throw ValidationError("manifest '" + id + "': sentences do not tile the timeline at index " +
                              std::to_string(i) + " (field sentences[" + std::to_string(i) +
                              "].start_s)");
      }
      cursor = sentences[i].end_s;
      seq.push_back(sentences[i].emotion);
    }
    if (!sentences.empty() && collapse_adjacent(seq) != plan.emotions) {
      throw ValidationError("manifest '" + id +
                            "': sentence emotions do not collapse to the stored plan (field plan)");
    }
    if (captions) captions->validate();
  }
};

}  // namespace emotrans
