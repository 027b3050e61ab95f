#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "emotrans/clients.hpp"
#include "emotrans/core.hpp"
#include "emotrans/dsp.hpp"
#include "emotrans/error.hpp"
#include "emotrans/rng.hpp"
#include "emotrans/text.hpp"

// Offline stand-ins for the external models. Each one is a pure function of
// its inputs plus the seed, so full pipeline runs are reproducible without
// network access. They are intentionally simple: tone synthesis, pitch
// matching, and spectral projections rather than learned models.

namespace emotrans {

// Indexed by EmotionLabel (angry, happy, neutral, sad, surprised).
inline constexpr std::array<double, kEmotionCount> kToneF0Hz = {190.0, 240.0, 150.0,
                                                                100.0, 320.0};
inline constexpr std::array<double, kEmotionCount> kToneAmplitude = {0.30, 0.24, 0.18,
                                                                     0.12, 0.28};
inline constexpr std::array<double, kEmotionCount> kToneCharSeconds = {0.055, 0.065,
                                                                       0.080, 0.110,
                                                                       0.070};

// ---------------------------------------------------------------------------
// Text generation fallback
// ---------------------------------------------------------------------------

namespace detail {

// [emotion][perspective][variant], "{topic}" is substituted at render time.
inline const char* en_sentence(EmotionLabel e, int persp, int variant) {
  static const char* table[kEmotionCount][3][2] = {
      {{"It makes my blood boil every time {topic} comes up.",
        "I am absolutely furious about how {topic} turned out."},
       {"You slam the table whenever {topic} is mentioned.",
        "You can barely contain your rage about {topic}."},
       {"They fume with anger whenever {topic} is brought up.",
        "They are outraged by everything surrounding {topic}."}},
      {{"I am delighted by how well {topic} is going these days.",
        "Thinking about {topic} fills me with pure joy."},
       {"You beam with happiness whenever {topic} works out.",
        "You feel wonderful about every part of {topic}."},
       {"They light up with joy whenever {topic} goes well.",
        "They are thrilled about the way {topic} unfolded."}},
      {{"I reviewed the basic facts about {topic} this morning.",
        "I will describe {topic} plainly, step by step."},
       {"You go over the usual details of {topic} as planned.",
        "You summarize {topic} in a calm and even tone."},
       {"They outline the main points of {topic} without fuss.",
        "They report on {topic} in a measured way."}},
      {{"Thinking about {topic} still fills me with a heavy sadness.",
        "I feel a quiet sorrow whenever {topic} is mentioned."},
       {"You sigh with grief whenever {topic} comes to mind.",
        "You carry a deep sadness about {topic} these days."},
       {"They mourn quietly whenever {topic} is discussed.",
        "They feel a lingering sorrow about {topic}."}},
      {{"I can hardly believe what just happened with {topic}!",
        "The sudden news about {topic} caught me completely off guard!"},
       {"You gasp at the unexpected turn {topic} has taken!",
        "You never saw the twist in {topic} coming at all!"},
       {"They are stunned by the sudden change in {topic}!",
        "They gape in astonishment at the news about {topic}!"}}};
  return table[static_cast<int>(e)][persp][variant];
}

inline const char* zh_sentence(EmotionLabel e, int persp, int variant) {
  static const char* table[kEmotionCount][3][2] = {
      {{"一提到{topic}我就火冒三丈，实在气不打一处来。",
        "我对{topic}的结果感到非常愤怒。"},
       {"你一听到{topic}就拍案而起，怒气冲冲。",
        "你对{topic}的事情气得说不出话来。"},
       {"他一谈到{topic}就怒火中烧。",
        "他对{topic}的一切感到十分恼火。"}},
      {{"想到{topic}我就满心欢喜，高兴得合不拢嘴。",
        "{topic}进展顺利，我开心极了。"},
       {"你聊起{topic}时眉开眼笑，满脸幸福。",
        "你为{topic}的好消息感到非常愉快。"},
       {"他说起{topic}时喜笑颜开。",
        "他为{topic}的顺利进展感到欣喜。"}},
      {{"我今天按计划整理了关于{topic}的基本情况。",
        "我来平静地说明一下{topic}的要点。"},
       {"你照常梳理了{topic}的相关细节。",
        "你用平稳的语气概述了{topic}。"},
       {"他如实介绍了{topic}的主要内容。",
        "他有条不紊地汇报了{topic}的进展。"}},
      {{"一想到{topic}，我心里就沉甸甸的，说不出的难过。",
        "提起{topic}，我总是感到深深的悲伤。"},
       {"你提到{topic}时叹了口气，满脸哀伤。",
        "你为{topic}的事情黯然神伤。"},
       {"他谈到{topic}时声音低沉，透着悲伤。",
        "他为{topic}的结局感到难过。"}},
      {{"没想到{topic}竟然变成这样，我惊讶极了！",
        "{topic}的消息来得太突然，完全出乎我的意料！"},
       {"你被{topic}的突变惊得目瞪口呆！",
        "你完全没料到{topic}会有这样的转折！"},
       {"他对{topic}的突然变化大吃一惊！",
        "他震惊地听着关于{topic}的消息！"}}};
  return table[static_cast<int>(e)][persp][variant];
}

inline std::string substitute_topic(std::string tpl, const std::string& topic) {
  const std::string slot = "{topic}";
  std::size_t pos;
  while ((pos = tpl.find(slot)) != std::string::npos)
    tpl.replace(pos, slot.size(), topic);
  return tpl;
}

}  // namespace detail

// Reads the plan, topic, and perspective back out of the structured prompt and
// fills phrase bank sentences. Pure in (prompt, language, seed).
class TemplateTextGenClient : public TextGenClient {
 public:
  std::vector<std::string> generate(const std::string& prompt, Language language,
                                    std::uint64_t seed) override {
    std::vector<EmotionLabel> plan;
    std::string topic = "the plan";
    int persp = 0;
    for (const std::string& raw : split_lines(prompt)) {
      std::string line = trim(raw);
      if (line.rfind("Sentence ", 0) == 0) {
        std::size_t p = line.find(" emotion: ");
        if (p != std::string::npos)
          plan.push_back(parse_emotion_or_throw(trim(line.substr(p + 10))));
      } else if (line.rfind("Topic: ", 0) == 0) {
        std::size_t p = line.find(" / ");
        topic = p == std::string::npos ? line.substr(7) : line.substr(p + 3);
      } else if (line.rfind("Perspective: ", 0) == 0) {
        std::string v = trim(line.substr(13));
        persp = v == "second-person" ? 1 : v == "third-person" ? 2 : 0;
      }
    }
    if (plan.empty())
      throw ClientError("template textgen: prompt carries no emotion plan", {});

    std::vector<std::string> out;
    out.reserve(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
      int variant = static_cast<int>(rng.uniform_index(2));
      const char* tpl = language == Language::kZh
                            ? detail::zh_sentence(plan[i], persp, variant)
                            : detail::en_sentence(plan[i], persp, variant);
      out.push_back(detail::substitute_topic(tpl, topic));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Speech synthesis fallback
// ---------------------------------------------------------------------------

// Renders each non-space character as a short tone burst whose pitch, level,
// and duration encode the requested emotion, so the downstream acoustic
// analysis has real structure to measure. Reference keys look like
// "speaker/emotion"; the speaker part nudges the pitch a few percent.
class ToneTtsClient : public TtsClient {
 public:
  explicit ToneTtsClient(int sample_rate = 16000) : sample_rate_(sample_rate) {}

  Waveform synthesize(const std::string& text, const std::string& reference_key,
                      std::uint64_t seed) override {
    std::size_t slash = reference_key.rfind('/');
    if (slash == std::string::npos)
      throw ClientError("tone tts: reference key must be 'speaker/emotion', got '" +
                            reference_key + "'",
                        {});
    EmotionLabel emotion = parse_emotion_or_throw(reference_key.substr(slash + 1));
    std::string speaker = reference_key.substr(0, slash);
    int idx = static_cast<int>(emotion);

    double f0 = kToneF0Hz[static_cast<std::size_t>(idx)] *
                (1.0 + 0.015 * (static_cast<double>(fnv1a(speaker) % 5) - 2.0));
    double amp = kToneAmplitude[static_cast<std::size_t>(idx)];
    double char_s = kToneCharSeconds[static_cast<std::size_t>(idx)];

    Waveform w;
    w.sample_rate = sample_rate_;
    append_silence(w, 0.080);
    std::size_t char_index = 0;
    for (const std::string& ch : split_utf8_chars(text)) {
      if (is_space_char(ch)) {
        append_silence(w, 0.040);
        continue;
      }
      Rng rng(mix_seed(mix_seed(seed, fnv1a(ch)), char_index));
      double jitter = rng.uniform(-1.0, 1.0);
      append_tone(w, f0, amp, char_s * (1.0 + 0.10 * jitter));
      ++char_index;
    }
    append_silence(w, 0.080);
    return w;
  }

 private:
  void append_silence(Waveform& w, double seconds) const {
    w.samples.resize(w.samples.size() +
                         static_cast<std::size_t>(std::llround(seconds * sample_rate_)),
                     0.0f);
  }

  void append_tone(Waveform& w, double f0, double amp, double seconds) const {
    std::size_t n = static_cast<std::size_t>(std::llround(seconds * sample_rate_));
    std::size_t attack = static_cast<std::size_t>(sample_rate_ * 8 / 1000);
    std::size_t release = static_cast<std::size_t>(sample_rate_ * 12 / 1000);
    for (std::size_t i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / sample_rate_;
      double env = 1.0;
      if (i < attack) env = static_cast<double>(i) / static_cast<double>(attack);
      if (n - i <= release)
        env = std::min(env, static_cast<double>(n - i) / static_cast<double>(release));
      double v = std::sin(2.0 * M_PI * f0 * t) + 0.25 * std::sin(4.0 * M_PI * f0 * t);
      w.samples.push_back(static_cast<float>(amp * env * v));
    }
  }

  int sample_rate_;
};

// ---------------------------------------------------------------------------
// Emotion recognition fallback
// ---------------------------------------------------------------------------

// Nearest tone pitch in log-frequency space.
class PitchSerClient : public SerClient {
 public:
  SerResult classify(const Waveform& audio) override {
    SerResult res;
    PitchEstimate pe = estimate_pitch(audio);
    if (pe.freq_hz <= 0.0) {
      res.label = EmotionLabel::kNeutral;
      res.score = 0.0;
      return res;
    }
    double best_dist = 1e30;
    for (int i = 0; i < kEmotionCount; ++i) {
      double d = std::abs(std::log2(pe.freq_hz / kToneF0Hz[static_cast<std::size_t>(i)]));
      if (d < best_dist) {
        best_dist = d;
        res.label = static_cast<EmotionLabel>(i);
      }
    }
    res.score = 1.0 / (1.0 + 4.0 * best_dist);
    return res;
  }
};

// ---------------------------------------------------------------------------
// Speech recognition fallback
// ---------------------------------------------------------------------------

// Knows the reference text up front (the pipeline supplies it from the
// manifest) and spreads character timings uniformly across the audio.
class KnownTextAsrClient : public AsrClient {
 public:
  explicit KnownTextAsrClient(std::string text) : text_(std::move(text)) {}

  AsrTranscript transcribe(const Waveform& audio) override {
    AsrTranscript t;
    t.text = text_;
    std::vector<std::string> chars = split_utf8_chars(text_);
    if (chars.empty()) return t;
    double dur = audio.duration_s();
    double step = dur / static_cast<double>(chars.size());
    for (std::size_t i = 0; i < chars.size(); ++i) {
      CharTiming ct;
      ct.character = chars[i];
      ct.start_s = step * static_cast<double>(i);
      ct.end_s = step * static_cast<double>(i + 1);
      t.char_timings.push_back(ct);
    }
    t.char_timings.back().end_s = dur;
    return t;
  }

 private:
  std::string text_;
};

// ---------------------------------------------------------------------------
// Embedding fallback
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> spectral_summary(const Waveform& audio) {
  static const double bank[] = {100.0, 150.0, 190.0, 240.0, 320.0, 380.0,
                                480.0, 640.0, 960.0, 1280.0, 1920.0, 2560.0};
  std::vector<double> feats;
  feats.reserve(16);
  const float* x = audio.samples.data();
  std::size_t n = audio.samples.size();
  for (double f : bank)
    feats.push_back(std::log(1e-10 + goertzel_power(x, n, f, audio.sample_rate)));
  feats.push_back(std::log(1e-10 + rms(x, n)));
  feats.push_back(zero_crossing_rate(x, n));
  PitchEstimate pe = estimate_pitch(audio);
  feats.push_back(pe.freq_hz > 0 ? std::log(pe.freq_hz) : 0.0);
  feats.push_back(pe.clarity);
  return feats;
}

}  // namespace detail

// Seeded random projection of a spectral summary, L2-normalized. Identical
// audio maps to the identical unit vector.
class SpectrumEmbedderClient : public EmbedderClient {
 public:
  explicit SpectrumEmbedderClient(int dim = 64, std::uint64_t seed = 0x45e5u)
      : dim_(dim), seed_(seed) {
    if (dim < 2) throw RangeError("embedder: dim must be >= 2");
  }

  EmbeddingVector embed(const Waveform& audio) override {
    std::vector<double> feats = detail::spectral_summary(audio);
    EmbeddingVector ev;
    ev.values.resize(static_cast<std::size_t>(dim_));
    Rng rng(Rng::substream(seed_, "embed-proj", 0).next_u64());
    double norm2 = 0.0;
    for (int d = 0; d < dim_; ++d) {
      double acc = 0.0;
      for (double f : feats) acc += rng.normal() * f;
      ev.values[static_cast<std::size_t>(d)] = static_cast<float>(acc);
      norm2 += acc * acc;
    }
    double norm = std::sqrt(norm2);
    if (norm < 1e-12) {
      ev.values.assign(static_cast<std::size_t>(dim_), 0.0f);
      ev.values[0] = 1.0f;
      return ev;
    }
    for (float& v : ev.values) v = static_cast<float>(v / norm);
    return ev;
  }

 private:
  int dim_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Frame feature fallback
// ---------------------------------------------------------------------------

// Frame-level spectral summary projected to the detector input width with a
// fixed seeded matrix. 50 frames per second, centered windows.
class SpectrumFeatureClient : public FeatureClient {
 public:
  explicit SpectrumFeatureClient(int dim = kFeatureDim, std::uint64_t seed = 0xfea7u)
      : dim_(dim), seed_(seed) {}

  FeatureSequence extract(const Waveform& audio) override {
    audio.validate();
    static const double bank[] = {100.0, 150.0, 190.0, 240.0,
                                  320.0, 480.0, 640.0, 960.0};
    constexpr int kBase = 10;  // 8 bands + log rms + zcr

    const double fr = kFeatureFrameRate;
    const double hop = audio.sample_rate / fr;
    long t_frames = std::max<long>(1, std::lround(audio.duration_s() * fr));

    Eigen::MatrixXf base(t_frames, kBase);
    std::size_t win = static_cast<std::size_t>(audio.sample_rate * 25 / 1000);
    for (long t = 0; t < t_frames; ++t) {
      double center = (static_cast<double>(t) + 0.5) * hop;
      std::size_t lo = 0;
      if (center > static_cast<double>(win) / 2.0)
        lo = static_cast<std::size_t>(center - static_cast<double>(win) / 2.0);
      std::size_t hi = std::min(audio.samples.size(), lo + win);
      const float* x = audio.samples.data() + lo;
      std::size_t n = hi > lo ? hi - lo : 0;
      int c = 0;
      for (double f : bank)
        base(t, c++) = static_cast<float>(
            std::log(1e-10 + goertzel_power(x, n, f, audio.sample_rate)));
      base(t, c++) = static_cast<float>(std::log(1e-10 + rms(x, n)));
      base(t, c++) = static_cast<float>(zero_crossing_rate(x, n));
    }

    Eigen::MatrixXf proj(kBase, dim_);
    Rng rng(Rng::substream(seed_, "feature-proj", 0).next_u64());
    for (int r = 0; r < kBase; ++r)
      for (int c = 0; c < dim_; ++c) proj(r, c) = static_cast<float>(rng.normal());

    FeatureSequence fs;
    fs.frames = base * proj;
    fs.frame_rate = fr;
    return fs;
  }

 private:
  int dim_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Caption fallback
// ---------------------------------------------------------------------------

namespace detail {

struct PromptSegmentLine {
  EmotionLabel emotion = EmotionLabel::kNeutral;
  std::string pitch;
  std::string energy;
  std::string speed;
  std::string start;
  std::string end;
};

struct ParsedCaptionPrompt {
  bool descriptive = false;
  std::string gender = "unknown";
  std::string age = "unknown";
  std::vector<PromptSegmentLine> segments;
};

inline std::string field_after(const std::string& line, const std::string& key, char stop) {
  std::size_t at = line.find(key);
  if (at == std::string::npos)
    throw ParseError("caption prompt: missing field '" + trim(key) + "'");
  at += key.size();
  std::size_t end = line.find(stop, at);
  if (end == std::string::npos) end = line.size();
  return trim(line.substr(at, end - at));
}

// Reads the speaker and segment lines back out of an integration prompt built
// by build_prompt(); fails loudly on anything else.
inline ParsedCaptionPrompt parse_caption_prompt(const std::string& prompt) {
  ParsedCaptionPrompt out;
  out.descriptive = prompt.find("[Global Description]") != std::string::npos;
  for (const std::string& raw : split_lines(prompt)) {
    std::string line = trim(raw);
    if (line.rfind("Speaker: ", 0) == 0) {
      out.gender = field_after(line, "gender: ", ',');
      out.age = field_after(line, "age: ", ',');
    } else if (line.rfind("Segment ", 0) == 0 && line.find(": emotion: ") != std::string::npos) {
      PromptSegmentLine seg;
      std::string display = field_after(line, "emotion: ", ',');
      bool matched = false;
      for (EmotionLabel e : all_emotions()) {
        if (display == emotion_display_name(e)) {
          seg.emotion = e;
          matched = true;
          break;
        }
      }
      if (!matched) throw ParseError("caption prompt: unknown emotion '" + display + "'");
      seg.pitch = field_after(line, "pitch: ", '(');
      seg.energy = field_after(line, "energy: ", '(');
      seg.speed = field_after(line, "speed: ", '(');
      seg.start = field_after(line, "start: ", ',');
      seg.end = field_after(line, "end: ", ',');
      out.segments.push_back(std::move(seg));
    }
  }
  if (out.segments.empty()) throw ParseError("caption prompt: no segment lines");
  return out;
}

// One phrase per emotion; each contains the emotion word plan parsing keys on.
inline const char* emotion_phrase(EmotionLabel e) {
  static const char* table[kEmotionCount] = {"an angry edge", "a happy glow",
                                             "a neutral calm", "a sad gravity",
                                             "a surprised spark"};
  return table[static_cast<int>(e)];
}

inline std::string profile_noun_phrase(const std::string& gender, const std::string& age) {
  std::string qual;
  if (age != "unknown") qual = age;
  if (gender != "unknown") qual += (qual.empty() ? "" : " ") + gender;
  if (qual.empty()) return "The speaker";
  bool vowel = std::string("aeiou").find(qual[0]) != std::string::npos;
  return (vowel ? "An " : "A ") + qual + " speaker";
}

}  // namespace detail

// Deterministic caption writer. Every attribute category and emotion named in
// the prompt is echoed back in fixed sentence frames, so the output always
// satisfies the caption validators and parses back to the exact plan.
class TemplateCaptionClient : public CaptionClient {
 public:
  std::string complete(const std::string& prompt, std::uint64_t /*seed*/) override {
    detail::ParsedCaptionPrompt in = detail::parse_caption_prompt(prompt);
    return in.descriptive ? descriptive(in) : instructional(in);
  }

 private:
  static std::string style_clause(const detail::PromptSegmentLine& seg) {
    return "a " + seg.pitch + " pitch, " + seg.energy + " energy, and a " + seg.speed +
           " pace";
  }

  static std::string instructional(const detail::ParsedCaptionPrompt& in) {
    const std::size_t n = in.segments.size();
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& seg = in.segments[i];
      if (i == 0) {
        text += detail::profile_noun_phrase(in.gender, in.age) + " opens on " +
                style_clause(seg) + ", conveying " + detail::emotion_phrase(seg.emotion) +
                ".";
      } else {
        const char* lead = (i + 1 == n && n > 2) ? "Finally" : (i == 1 ? "Then" : "Later");
        text += std::string(lead) + " the voice turns to " + style_clause(seg) +
                ", revealing " + detail::emotion_phrase(seg.emotion) + ".";
      }
      text += "\n";
    }
    return text;
  }

  static std::string descriptive(const detail::ParsedCaptionPrompt& in) {
    const std::size_t n = in.segments.size();
    std::string global = detail::profile_noun_phrase(in.gender, in.age) + " ";
    if (n == 1) {
      global += std::string("keeps ") + detail::emotion_phrase(in.segments[0].emotion) +
                " at a steady pace and pitch for the whole clip.";
    } else {
      global += "moves from";
      for (std::size_t i = 0; i < n; ++i)
        global += std::string(i == 0 ? " " : " to ") + emotion_name(in.segments[i].emotion);
      global += " as the audio develops, shifting pace and pitch from segment to segment.";
    }

    std::string text = "[Global Description]\n" + global + "\n\n[Partial Description]\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto& seg = in.segments[i];
      std::string clause = style_clause(seg);
      clause[0] = 'A';  // sentence case
      text += "Part " + std::to_string(i + 1) + " (" + seg.start + " ~ " + seg.end +
              "): " + clause + " shape " + detail::emotion_phrase(seg.emotion) + ".\n";
    }
    return text;
  }
};

}  // namespace emotrans
