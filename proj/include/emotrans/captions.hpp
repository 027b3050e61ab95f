#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emotrans/clients.hpp"
#include "emotrans/core.hpp"
#include "emotrans/error.hpp"
#include "emotrans/rng.hpp"
#include "emotrans/text.hpp"
#include "emotrans/version.hpp"

namespace emotrans {

// =============================================================================
// Prompt construction
// =============================================================================

enum class CaptionVersion { kInstructional, kDescriptive };

inline const char* caption_version_name(CaptionVersion v) {
  return v == CaptionVersion::kInstructional ? "v_i" : "v_d";
}

// Instructional-version integration prompt. The text between the dashes and
// the slot names is functional model input and must stay byte-stable.
inline const std::string kInstructionalPromptTemplate =
    std::string("Below is an instruction that describes a task. Write a response that "
                "appropriately completes the request.\n\n") +
    "Instruction:\n" +
    "You will be provided with paralinguistic attributes of an audio clip containing "
    "{segment_num} consecutive segment(s) spoken by the same speaker. Your task is to "
    "generate {segment_num} fluent, expressive, and objective caption(s), each describing "
    "the speaker's vocal style, emotional dynamics, and communicative intent.\n\n" +
    "Output Guidelines:\n" +
    "1. Output exactly {segment_num} line(s)—one caption per segment—without "
    "numbering.\n" +
    "2. Do NOT quote or reuse any transcript content.\n" +
    "3. The language must reflect attributes such as speaking rate, pitch, energy, and "
    "emotion in a natural and concise manner.\n" +
    "4. Mention the speaker's gender and age only in the first caption, embedding them "
    "naturally into the sentence.\n" +
    "5. Ensure coherence between captions using appropriate transition words.\n" +
    "6. The tone must remain descriptive and objective.\n\n" +
    "Input:\n" +
    "{segment_descriptions}\n";

// Descriptive-version integration prompt.
inline const std::string kDescriptivePromptTemplate =
    std::string("Below is an instruction that describes a task. Write a response that "
                "appropriately completes the request.\n\n") +
    "Instruction:\n" +
    "You will be given an audio clip divided into {segment_num} segment(s), each "
    "containing pitch, speed, energy, emotion, age, gender, transcript, and start/end "
    "timestamps. Based on this information, generate two parts:\n\n" +
    "[Global Description]\n" +
    "Provide an overall natural-language description of the speaker’s emotional "
    "state, vocal tone, and prosodic variation across the entire audio clip.\n\n" +
    "[Partial Description]\n" +
    "Provide a short and objective description for each segment individually.\n\n" +
    "Output Guidelines:\n\n" +
    "[Global Description]\n" +
    "1. Describe emotional dynamics, tone shifts, speaking rate, and pitch variations "
    "throughout the full clip.\n" +
    "2. Integrate gender and age naturally.\n" +
    "3. Reference the transcript for context, but do not copy or quote any part of it.\n" +
    "4. Use fluent, concise, and descriptive language. Avoid excessive sentiment, "
    "symbolic characters (e.g., *, #), or line breaks.\n" +
    "5. If there is only one segment, do not mention emotional changes.\n\n" +
    "[Partial Description]\n" +
    "1. Each segment must begin with the format: PartX (start_time ~ end_time).\n" +
    "2. Use full sentences to objectively describe pitch, speed, energy, and emotion in "
    "the segment.\n" +
    "3. Do not refer to the speaker or use subjective terms; keep each description "
    "self-contained.\n" +
    "4. Reference the transcript but do not quote it.\n" +
    "5. Descriptions should be short, fluent, and symbol-free.\n\n" +
    "Input:\n" +
    "{segment_data}\n";

namespace detail {

inline std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string replace_all_slots(std::string s, std::string_view slot,
                                     std::string_view with) {
  std::size_t pos = 0;
  while ((pos = s.find(slot, pos)) != std::string::npos) {
    s.replace(pos, slot.size(), with);
    pos += with.size();
  }
  return s;
}

}  // namespace detail

// Per-segment attribute lines plus a speaker line; the {segment_descriptions}
// and {segment_data} slots share this layout.
inline std::string render_segment_block(const AttributeSequence& attrs, Language language) {
  if (attrs.segments.empty())
    throw ValidationError("caption prompt: attribute sequence is empty");
  const char* unit = language == Language::kZh ? "chars/s" : "words/s";
  std::string out;
  out += std::string("Speaker: gender: ") + gender_name(attrs.profile.gender) +
         ", age: " + age_bucket_name(attrs.profile.age_bucket) + "\n";
  for (std::size_t i = 0; i < attrs.segments.size(); ++i) {
    const SegmentAttributes& s = attrs.segments[i];
    out += "Segment " + std::to_string(i + 1) + ": emotion: " +
           emotion_display_name(s.emotion) +
           ", pitch: " + level_name(s.pitch_cat) + " (" + detail::fmt_fixed(s.pitch_hz, 1) +
           " Hz), energy: " + level_name(s.energy_cat) + " (" +
           detail::fmt_fixed(s.energy_db, 1) + " dBFS), speed: " + speed_name(s.speed_cat) +
           " (" + detail::fmt_fixed(s.speed_ups, 2) + " " + unit +
           "), start: " + format_timestamp(s.start_s) + ", end: " + format_timestamp(s.end_s) +
           ", transcript: \"" + s.transcript + "\"\n";
  }
  return out;
}

struct PromptSpec {
  CaptionVersion version = CaptionVersion::kInstructional;
  int segment_count = 1;
  std::string segment_descriptions;  // rendered attribute block
  Language language = Language::kEn;
};

inline PromptSpec make_prompt_spec(CaptionVersion version, const AttributeSequence& attrs,
                                   Language language) {
  PromptSpec spec;
  spec.version = version;
  spec.segment_count = static_cast<int>(attrs.segments.size());
  spec.segment_descriptions = render_segment_block(attrs, language);
  spec.language = language;
  return spec;
}

inline std::string build_prompt(const PromptSpec& spec, const AttributeSequence& attrs) {
  if (spec.segment_count != static_cast<int>(attrs.segments.size()))
    throw ValidationError("caption prompt: spec segment_count does not match attributes");
  std::string block = spec.segment_descriptions.empty()
                          ? render_segment_block(attrs, spec.language)
                          : spec.segment_descriptions;
  std::string tpl = spec.version == CaptionVersion::kInstructional
                        ? kInstructionalPromptTemplate
                        : kDescriptivePromptTemplate;
  tpl = detail::replace_all_slots(std::move(tpl), "{segment_num}",
                                  std::to_string(spec.segment_count));
  tpl = detail::replace_all_slots(std::move(tpl), "{segment_descriptions}", block);
  tpl = detail::replace_all_slots(std::move(tpl), "{segment_data}", block);
  return tpl;
}

// =============================================================================
// Validation
// =============================================================================

struct RuleViolation {
  std::string rule;
  std::string message;

  bool operator==(const RuleViolation&) const = default;
};

struct ValidationReport {
  std::vector<RuleViolation> violations;

  bool passed() const { return violations.empty(); }

  std::string brief() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += ", ";
      out += v.rule;
    }
    return out.empty() ? "ok" : out;
  }
};

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Case-sensitive whole-word search; callers lowercase both sides first.
inline bool contains_word(const std::string& text, const std::string& word) {
  if (word.empty()) return false;
  std::size_t pos = 0;
  while ((pos = text.find(word, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    std::size_t end = pos + word.size();
    bool right_ok = end >= text.size() || !is_word_char(text[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

inline std::vector<std::string> content_lines(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& line : split_lines(text)) {
    std::string t = trim(line);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

// Keywords that mark an emotion in free text; used by validation and by plan
// recovery, so the template backend and the parser stay in lockstep.
inline const std::vector<std::string>& emotion_keywords(EmotionLabel e) {
  static const std::vector<std::string> table[kEmotionCount] = {
      {"angry", "anger"},
      {"happy", "happiness"},
      {"neutral"},
      {"sadness", "sad"},
      {"surprised", "surprise"},
  };
  return table[static_cast<int>(e)];
}

inline bool line_mentions_emotion(const std::string& line_lower, EmotionLabel e) {
  for (const std::string& kw : emotion_keywords(e))
    if (contains_word(line_lower, kw)) return true;
  return false;
}

inline const std::vector<std::string>& profile_terms() {
  static const std::vector<std::string> terms = {
      "male", "female", "man", "woman", "men", "women", "boy", "girl", "gentleman",
      "lady", "child", "kid", "teenager", "teen", "young", "old", "elderly", "adult",
      "aged",
  };
  return terms;
}

// Sliding verbatim windows of the transcript, 8 characters for en and 4 for
// zh, searched byte-exactly in the caption.
inline std::optional<std::string> find_transcript_leak(const std::string& caption,
                                                       const std::string& transcript,
                                                       Language language) {
  const std::size_t window = language == Language::kZh ? 4 : 8;
  std::vector<std::string> chars = split_utf8_chars(transcript);
  if (chars.size() < window) return std::nullopt;
  for (std::size_t i = 0; i + window <= chars.size(); ++i) {
    std::string span;
    bool blank = true;
    for (std::size_t j = 0; j < window; ++j) {
      span += chars[i + j];
      if (!is_space_char(chars[i + j])) blank = false;
    }
    if (blank) continue;
    if (caption.find(span) != std::string::npos) return span;
  }
  return std::nullopt;
}

inline bool looks_numbered(const std::string& trimmed) {
  if (trimmed.rfind("- ", 0) == 0) return true;
  std::size_t i = 0;
  if (i < trimmed.size() && trimmed[i] == '(') ++i;
  std::size_t digits = 0;
  while (i < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[i]))) {
    ++i;
    ++digits;
  }
  if (digits == 0) return false;
  return i < trimmed.size() &&
         (trimmed[i] == '.' || trimmed[i] == ')' || trimmed[i] == ':');
}

// Every category name carried by the attributes must show up somewhere in the
// caption text.
inline void check_label_omission(const std::string& caption_lower,
                                 const AttributeSequence& attrs,
                                 std::vector<RuleViolation>& out) {
  std::vector<std::string> missing;
  auto require_word = [&](const std::string& word) {
    if (!contains_word(caption_lower, word) &&
        std::find(missing.begin(), missing.end(), word) == missing.end())
      missing.push_back(word);
  };
  for (const SegmentAttributes& s : attrs.segments) {
    if (!line_mentions_emotion(caption_lower, s.emotion))
      require_word(emotion_keywords(s.emotion).front());
    require_word(level_name(s.pitch_cat));
    require_word(level_name(s.energy_cat));
    require_word(speed_name(s.speed_cat));
  }
  for (const std::string& word : missing)
    out.push_back({"label_omission", "category '" + word + "' is never mentioned"});
}

}  // namespace detail

inline ValidationReport validate_vi(const std::string& caption, int segment_count,
                                    const std::vector<std::string>& transcripts,
                                    Language language = Language::kEn,
                                    const AttributeSequence* attrs = nullptr) {
  ValidationReport rep;
  std::vector<std::string> lines = detail::content_lines(caption);

  if (static_cast<int>(lines.size()) != segment_count)
    rep.violations.push_back({"line_count", "expected " + std::to_string(segment_count) +
                                                " line(s), found " +
                                                std::to_string(lines.size())});

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::looks_numbered(lines[i]))
      rep.violations.push_back(
          {"numbering", "line " + std::to_string(i + 1) + " carries a list prefix"});
  }

  for (const std::string& transcript : transcripts) {
    if (auto span = detail::find_transcript_leak(caption, transcript, language)) {
      rep.violations.push_back({"transcript_leak", "verbatim span \"" + *span + "\""});
      break;
    }
  }

  if (caption.find('*') != std::string::npos || caption.find('#') != std::string::npos)
    rep.violations.push_back({"symbols", "caption contains * or #"});

  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string lower = to_lower(lines[i]);
    for (const std::string& term : detail::profile_terms()) {
      if (detail::contains_word(lower, term)) {
        rep.violations.push_back({"profile_terms", "line " + std::to_string(i + 1) +
                                                       " mentions '" + term + "'"});
        break;
      }
    }
  }

  if (attrs != nullptr)
    detail::check_label_omission(to_lower(caption), *attrs, rep.violations);
  return rep;
}

namespace detail {

struct PartHeader {
  int index = 0;
  int start_s = 0;
  int end_s = 0;
};

// Accepts "Part 1 (00:00 ~ 00:05)", with "-" or an en dash as separator and an
// optional trailing colon plus same-line description.
inline std::optional<PartHeader> parse_part_header(const std::string& trimmed) {
  if (trimmed.rfind("Part", 0) != 0) return std::nullopt;
  std::size_t i = 4;
  while (i < trimmed.size() && trimmed[i] == ' ') ++i;
  std::size_t digits = i;
  while (digits < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[digits])))
    ++digits;
  if (digits == i) return std::nullopt;
  PartHeader h;
  h.index = std::stoi(trimmed.substr(i, digits - i));
  i = digits;
  while (i < trimmed.size() && trimmed[i] == ' ') ++i;
  if (i >= trimmed.size() || trimmed[i] != '(') return std::nullopt;
  ++i;
  auto read_time = [&](int& out) -> bool {
    if (i + 5 > trimmed.size()) return false;
    std::string stamp = trimmed.substr(i, 5);
    try {
      out = parse_timestamp(stamp);
    } catch (const ParseError&) {
      return false;
    }
    i += 5;
    return true;
  };
  while (i < trimmed.size() && trimmed[i] == ' ') ++i;
  if (!read_time(h.start_s)) return std::nullopt;
  while (i < trimmed.size() && trimmed[i] == ' ') ++i;
  if (i < trimmed.size() && (trimmed[i] == '~' || trimmed[i] == '-')) {
    ++i;
  } else if (trimmed.compare(i, 3, "–") == 0) {
    i += 3;
  } else {
    return std::nullopt;
  }
  while (i < trimmed.size() && trimmed[i] == ' ') ++i;
  if (!read_time(h.end_s)) return std::nullopt;
  if (i >= trimmed.size() || trimmed[i] != ')') return std::nullopt;
  ++i;
  if (i < trimmed.size() && trimmed[i] == ':') ++i;
  if (i < trimmed.size() && trimmed[i] != ' ') return std::nullopt;
  return h;
}

}  // namespace detail

inline ValidationReport validate_vd(const std::string& caption, int segment_count = -1,
                                    const AttributeSequence* attrs = nullptr) {
  ValidationReport rep;
  std::vector<std::string> lines = detail::content_lines(caption);

  std::size_t global_at = lines.size();
  std::size_t partial_at = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i] == "[Global Description]" && global_at == lines.size()) global_at = i;
    if (lines[i] == "[Partial Description]" && partial_at == lines.size()) partial_at = i;
  }
  if (global_at != 0)
    rep.violations.push_back({"header_global", "caption must open with [Global Description]"});
  if (partial_at == lines.size()) {
    rep.violations.push_back({"header_partial", "[Partial Description] header missing"});
    return rep;
  }
  if (global_at != lines.size() && partial_at < global_at)
    rep.violations.push_back({"header_order", "[Partial Description] precedes the global part"});

  std::size_t body_begin = (global_at == lines.size()) ? 0 : global_at + 1;
  long global_lines = static_cast<long>(partial_at) - static_cast<long>(body_begin);
  if (global_lines != 1)
    rep.violations.push_back(
        {"global_shape", "global description must be exactly one line, found " +
                             std::to_string(global_lines)});

  if (caption.find('*') != std::string::npos || caption.find('#') != std::string::npos)
    rep.violations.push_back({"symbols", "caption contains * or #"});

  int parts = 0;
  int prev_index = 0;
  int prev_end = 0;
  for (std::size_t i = partial_at + 1; i < lines.size(); ++i) {
    bool claims_part = lines[i].rfind("Part", 0) == 0;
    auto header = detail::parse_part_header(lines[i]);
    if (!header) {
      // Continuation lines of the previous description are fine; a broken
      // Part header or stray text before the first entry is not.
      if (claims_part || parts == 0)
        rep.violations.push_back({"part_format", "line '" + lines[i].substr(0, 40) +
                                                     "' is not a Part entry"});
      continue;
    }
    ++parts;
    if (header->index != prev_index + 1)
      rep.violations.push_back({"part_index", "expected Part " +
                                                  std::to_string(prev_index + 1) + ", found " +
                                                  std::to_string(header->index)});
    if (header->end_s < header->start_s)
      rep.violations.push_back(
          {"part_times", "Part " + std::to_string(header->index) + " ends before it starts"});
    if (parts > 1 && header->start_s < prev_end)
      rep.violations.push_back({"timestamp_order",
                                "Part " + std::to_string(header->index) +
                                    " starts before the previous part ends"});
    prev_index = header->index;
    prev_end = header->end_s;
  }
  if (parts == 0)
    rep.violations.push_back({"part_format", "no Part entries found"});
  if (segment_count >= 0 && parts != segment_count)
    rep.violations.push_back({"part_count", "expected " + std::to_string(segment_count) +
                                                " part(s), found " + std::to_string(parts)});

  if (attrs != nullptr)
    detail::check_label_omission(to_lower(caption), *attrs, rep.violations);
  return rep;
}

inline ValidationReport validate_caption(const PromptSpec& spec, const std::string& caption,
                                         const AttributeSequence& attrs) {
  if (spec.version == CaptionVersion::kInstructional) {
    std::vector<std::string> transcripts;
    for (const auto& s : attrs.segments) transcripts.push_back(s.transcript);
    return validate_vi(caption, spec.segment_count, transcripts, spec.language, &attrs);
  }
  ValidationReport rep = validate_vd(caption, spec.segment_count, &attrs);
  std::vector<std::string> transcripts;
  for (const auto& s : attrs.segments) transcripts.push_back(s.transcript);
  for (const std::string& transcript : transcripts) {
    if (auto span = detail::find_transcript_leak(caption, transcript, spec.language)) {
      rep.violations.push_back({"transcript_leak", "verbatim span \"" + *span + "\""});
      break;
    }
  }
  return rep;
}

// =============================================================================
// Composition with regeneration
// =============================================================================

struct ComposeResult {
  std::string text;
  int attempts = 0;
  std::vector<ValidationReport> reports;
};

inline ComposeResult compose_with_regeneration(CaptionClient& client, const PromptSpec& spec,
                                               const AttributeSequence& attrs,
                                               int max_attempts = 3, std::uint64_t seed = 0) {
  if (max_attempts < 1) throw RangeError("caption compose: max_attempts must be >= 1");
  const std::string base = build_prompt(spec, attrs);
  std::string prompt = base;
  ComposeResult res;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::string text = client.complete(prompt, mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    ValidationReport rep = validate_caption(spec, text, attrs);
    res.reports.push_back(rep);
    res.attempts = attempt + 1;
    if (rep.passed()) {
      res.text = std::move(text);
      return res;
    }
    prompt = base + "\nYour previous response broke these rules; regenerate and fix them:\n";
    for (const RuleViolation& v : rep.violations)
      prompt += "- " + v.rule + ": " + v.message + "\n";
  }
  std::string detail_msg;
  for (std::size_t i = 0; i < res.reports.size(); ++i)
    detail_msg += " [attempt " + std::to_string(i + 1) + ": " + res.reports[i].brief() + "]";
  throw ConsistencyError("caption compose: validation failed after " +
                         std::to_string(res.attempts) + " attempt(s):" + detail_msg);
}

// Both caption versions plus the plan they encode, ready for the manifest.
inline CaptionRecord compose_caption_record(CaptionClient& client,
                                            const AttributeSequence& attrs, Language language,
                                            std::uint64_t seed, int max_attempts = 3) {
  CaptionRecord rec;
  rec.v_i = compose_with_regeneration(
                client, make_prompt_spec(CaptionVersion::kInstructional, attrs, language),
                attrs, max_attempts, mix_seed(seed, fnv1a("caption-vi")))
                .text;
  rec.v_d = compose_with_regeneration(
                client, make_prompt_spec(CaptionVersion::kDescriptive, attrs, language),
                attrs, max_attempts, mix_seed(seed, fnv1a("caption-vd")))
                .text;
  std::vector<EmotionLabel> seq;
  for (const auto& s : attrs.segments) seq.push_back(s.emotion);
  rec.encoded_plan = TransitionPlan{collapse_adjacent(seq)};
  rec.validate();
  return rec;
}

// =============================================================================
// SSML dialect (documented in docs/ssml.md)
// =============================================================================

struct SsmlSegment {
  int index = 0;
  EmotionLabel emotion = EmotionLabel::kNeutral;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string pitch;
  std::string energy;
  std::string speed;
  std::string text;

  bool operator==(const SsmlSegment&) const = default;
};

struct SsmlDocument {
  int version = kSsmlDialectVersion;
  SpeakerProfile profile;
  std::vector<SsmlSegment> segments;

  bool operator==(const SsmlDocument&) const = default;

  TransitionPlan plan() const {
    std::vector<EmotionLabel> seq;
    for (const auto& s : segments) seq.push_back(s.emotion);
    return TransitionPlan{collapse_adjacent(seq)};
  }
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string xml_unescape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    static const std::pair<const char*, char> entities[] = {
        {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
    bool matched = false;
    for (const auto& [name, ch] : entities) {
      std::size_t len = std::string_view(name).size();
      if (s.compare(i, len, name) == 0) {
        out += ch;
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) throw FormatError("ssml: unknown entity near '" + s.substr(i, 8) + "'");
  }
  return out;
}

// Minimal scanner for the emo-segment dialect; deliberately strict.
struct SsmlScanner {
  const std::string& s;
  std::size_t i = 0;

  void skip_ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }

  bool consume(std::string_view lit) {
    if (s.compare(i, lit.size(), lit) != 0) return false;
    i += lit.size();
    return true;
  }

  void expect(std::string_view lit, const char* what) {
    if (!consume(lit)) throw FormatError(std::string("ssml: expected ") + what);
  }

  // Reads name="value" pairs up to '>' or '/>'; returns true when the tag was
  // self-closing.
  bool read_attributes(std::map<std::string, std::string>& attrs) {
    while (true) {
      skip_ws();
      if (consume("/>")) return true;
      if (consume(">")) return false;
      std::size_t start = i;
      while (i < s.size() && (is_word_char(s[i]) || s[i] == '-' || s[i] == '_')) ++i;
      if (i == start) throw FormatError("ssml: malformed attribute list");
      std::string name = s.substr(start, i - start);
      expect("=\"", "attribute value");
      std::size_t vstart = i;
      while (i < s.size() && s[i] != '"') ++i;
      if (i >= s.size()) throw FormatError("ssml: unterminated attribute value");
      attrs[name] = xml_unescape(s.substr(vstart, i - vstart));
      ++i;
    }
  }
};

inline int ssml_int(const std::map<std::string, std::string>& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw FormatError("ssml: missing attribute '" + key + "'");
  const std::string& v = it->second;
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      }))
    throw FormatError("ssml: attribute '" + key + "' is not a number");
  return std::stoi(v);
}

inline std::string ssml_str(const std::map<std::string, std::string>& attrs,
                            const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw FormatError("ssml: missing attribute '" + key + "'");
  return it->second;
}

inline int ssml_time(const std::map<std::string, std::string>& attrs, const std::string& key) {
  try {
    return parse_timestamp(ssml_str(attrs, key));
  } catch (const ParseError& e) {
    throw FormatError(std::string("ssml: ") + e.what());
  }
}

}  // namespace detail

inline std::string emit_ssml(const AttributeSequence& attrs) {
  if (attrs.segments.empty()) throw ValidationError("ssml: attribute sequence is empty");
  std::string out = "<speak dialect=\"emo-segment\" version=\"" +
                    std::to_string(kSsmlDialectVersion) + "\">\n";
  if (!attrs.profile.empty()) {
    out += "  <profile";
    if (attrs.profile.gender != Gender::kUnknown)
      out += std::string(" gender=\"") + gender_name(attrs.profile.gender) + "\"";
    if (attrs.profile.age_bucket != AgeBucket::kUnknownAge)
      out += std::string(" age=\"") + age_bucket_name(attrs.profile.age_bucket) + "\"";
    out += "/>\n";
  }
  for (std::size_t i = 0; i < attrs.segments.size(); ++i) {
    const SegmentAttributes& s = attrs.segments[i];
    out += "  <segment index=\"" + std::to_string(i + 1) + "\" emotion=\"" +
           emotion_name(s.emotion) + "\" start=\"" + format_timestamp(s.start_s) +
           "\" end=\"" + format_timestamp(s.end_s) + "\" pitch=\"" + level_name(s.pitch_cat) +
           "\" energy=\"" + level_name(s.energy_cat) + "\" speed=\"" +
           speed_name(s.speed_cat) + "\">" + detail::xml_escape(s.transcript) +
           "</segment>\n";
  }
  out += "</speak>\n";
  return out;
}

inline SsmlDocument parse_ssml(const std::string& text) {
  detail::SsmlScanner sc{text};
  SsmlDocument doc;

  sc.skip_ws();
  sc.expect("<speak", "<speak> root element");
  std::map<std::string, std::string> root;
  if (sc.read_attributes(root)) throw FormatError("ssml: <speak> may not self-close");
  if (detail::ssml_str(root, "dialect") != "emo-segment")
    throw FormatError("ssml: unknown dialect '" + detail::ssml_str(root, "dialect") + "'");
  if (detail::ssml_int(root, "version") != kSsmlDialectVersion)
    throw FormatError("ssml: unsupported version " + detail::ssml_str(root, "version"));

  bool closed = false;
  bool saw_segment = false;
  while (sc.i < text.size()) {
    sc.skip_ws();
    if (sc.consume("</speak>")) {
      closed = true;
      break;
    }
    if (sc.consume("<profile")) {
      if (saw_segment) throw FormatError("ssml: <profile> must precede segments");
      std::map<std::string, std::string> attrs;
      if (!sc.read_attributes(attrs)) throw FormatError("ssml: <profile> must self-close");
      if (auto it = attrs.find("gender"); it != attrs.end()) {
        try {
          doc.profile.gender = parse_gender_or_throw(it->second);
        } catch (const Error&) {
          throw FormatError("ssml: unknown gender '" + it->second + "'");
        }
      }
      if (auto it = attrs.find("age"); it != attrs.end()) {
        try {
          doc.profile.age_bucket = parse_age_bucket_or_throw(it->second);
        } catch (const Error&) {
          throw FormatError("ssml: unknown age '" + it->second + "'");
        }
      }
      continue;
    }
    if (sc.consume("<segment")) {
      saw_segment = true;
      std::map<std::string, std::string> attrs;
      if (sc.read_attributes(attrs)) throw FormatError("ssml: <segment> needs a body");
      SsmlSegment seg;
      seg.index = detail::ssml_int(attrs, "index");
      if (seg.index != static_cast<int>(doc.segments.size()) + 1)
        throw FormatError("ssml: segment index " + std::to_string(seg.index) +
                          " out of order");
      auto emotion = parse_emotion(detail::ssml_str(attrs, "emotion"));
      if (!emotion)
        throw FormatError("ssml: unknown emotion '" + detail::ssml_str(attrs, "emotion") + "'");
      seg.emotion = *emotion;
      seg.start_s = detail::ssml_time(attrs, "start");
      seg.end_s = detail::ssml_time(attrs, "end");
      if (seg.end_s < seg.start_s) throw FormatError("ssml: segment ends before it starts");
      seg.pitch = detail::ssml_str(attrs, "pitch");
      seg.energy = detail::ssml_str(attrs, "energy");
      seg.speed = detail::ssml_str(attrs, "speed");
      for (const std::string& level : {seg.pitch, seg.energy})
        if (level != "low" && level != "medium" && level != "high")
          throw FormatError("ssml: unknown level '" + level + "'");
      if (seg.speed != "slow" && seg.speed != "medium" && seg.speed != "fast")
        throw FormatError("ssml: unknown speed '" + seg.speed + "'");
      std::size_t body = sc.i;
      while (sc.i < text.size() && text[sc.i] != '<') ++sc.i;
      seg.text = detail::xml_unescape(text.substr(body, sc.i - body));
      sc.expect("</segment>", "</segment> close tag");
      doc.segments.push_back(std::move(seg));
      continue;
    }
    throw FormatError("ssml: unexpected content at offset " + std::to_string(sc.i));
  }
  if (!closed) throw FormatError("ssml: missing </speak>");
  sc.skip_ws();
  if (sc.i != text.size()) throw FormatError("ssml: trailing content after </speak>");
  if (doc.segments.empty()) throw FormatError("ssml: no segments");
  return doc;
}

// =============================================================================
// Plan recovery
// =============================================================================

struct CaptionPlanParse {
  TransitionPlan plan;
  bool exact = true;  // false when keyword extraction had to guess
};

// SSML parses exactly; free text falls back to per-line keyword scanning.
inline CaptionPlanParse parse_caption_plan(const std::string& text) {
  if (trim(text).rfind("<speak", 0) == 0) return {parse_ssml(text).plan(), true};

  CaptionPlanParse out;
  std::vector<EmotionLabel> seq;
  for (const std::string& raw : detail::content_lines(text)) {
    std::string lower = to_lower(raw);
    std::size_t best_pos = std::string::npos;
    EmotionLabel best = EmotionLabel::kNeutral;
    int found = 0;
    for (EmotionLabel e : all_emotions()) {
      std::size_t at = std::string::npos;
      for (const std::string& kw : detail::emotion_keywords(e)) {
        std::size_t pos = 0;
        while ((pos = lower.find(kw, pos)) != std::string::npos) {
          bool left_ok = pos == 0 || !detail::is_word_char(lower[pos - 1]);
          std::size_t end = pos + kw.size();
          bool right_ok = end >= lower.size() || !detail::is_word_char(lower[end]);
          if (left_ok && right_ok) {
            at = std::min(at, pos);
            break;
          }
          ++pos;
        }
      }
      if (at == std::string::npos) continue;
      ++found;
      if (at < best_pos) {
        best_pos = at;
        best = e;
      }
    }
    if (found == 0) continue;
    if (found > 1) out.exact = false;
    seq.push_back(best);
  }
  std::vector<EmotionLabel> collapsed = collapse_adjacent(seq);
  if (collapsed.empty()) throw ParseError("caption plan: no emotion keywords found");
  out.plan = TransitionPlan{std::move(collapsed)};
  return out;
}

}  // namespace emotrans
