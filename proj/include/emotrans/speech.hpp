#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "emotrans/audio.hpp"
#include "emotrans/clients.hpp"
#include "emotrans/core.hpp"
#include "emotrans/error.hpp"
#include "emotrans/rng.hpp"

namespace emotrans {

inline constexpr double kSilenceRmsEpsilon = 1e-4;  // full-scale RMS guard
inline constexpr int kDefaultMaxSynthesisAttempts = 5;

// ---------------------------------------------------------------------------
// Reference catalog
// ---------------------------------------------------------------------------

// speaker_id -> emotion name -> reference audio key.
struct ReferenceCatalog {
  std::map<std::string, std::map<std::string, std::string>> entries;

  // Every listed speaker must cover all five emotions.
  void validate() const {
    for (const auto& [speaker, by_emotion] : entries) {
      for (EmotionLabel e : all_emotions()) {
        if (by_emotion.find(emotion_name(e)) == by_emotion.end())
          throw ValidationError("reference catalog: speaker '" + speaker +
                                "' missing emotion '" + emotion_name(e) + "'");
      }
    }
  }
};

// Synthetic catalog whose keys the bundled tone synthesizer understands.
inline ReferenceCatalog default_reference_catalog(
    const std::vector<std::string>& speakers) {
  ReferenceCatalog cat;
  for (const std::string& s : speakers)
    for (EmotionLabel e : all_emotions())
      cat.entries[s][emotion_name(e)] = s + "/" + emotion_name(e);
  return cat;
}

inline std::string select_reference(const ReferenceCatalog& catalog,
                                    const std::string& speaker_id,
                                    EmotionLabel emotion) {
  auto sit = catalog.entries.find(speaker_id);
  if (sit == catalog.entries.end())
    throw ValidationError("reference catalog: unknown speaker '" + speaker_id + "'");
  auto eit = sit->second.find(emotion_name(emotion));
  if (eit == sit->second.end())
    throw ValidationError("reference catalog: speaker '" + speaker_id +
                          "' has no reference for '" + emotion_name(emotion) + "'");
  return eit->second;
}

// ---------------------------------------------------------------------------
// Gated synthesis
// ---------------------------------------------------------------------------

struct SynthesisResult {
  Waveform audio;
  int attempts = 0;       // attempts consumed, 1-based
  double ser_score = 0.0;  // confidence of the accepting SER call
};

// Synthesizes and re-synthesizes with fresh derived seeds until the SER
// label matches the target emotion. Throws ConsistencyError once the budget
// is spent; the caller drops the utterance from the manifest.
inline SynthesisResult synthesize_with_retry(TtsClient& tts, SerClient& ser,
                                             const std::string& text,
                                             EmotionLabel emotion,
                                             const std::string& reference_key,
                                             std::uint64_t seed,
                                             int max_attempts = kDefaultMaxSynthesisAttempts) {
  if (max_attempts < 1) throw RangeError("synthesize_with_retry: max_attempts < 1");
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::uint64_t attempt_seed =
        mix_seed(seed, static_cast<std::uint64_t>(attempt - 1));
    Waveform audio = tts.synthesize(text, reference_key, attempt_seed);
    audio.validate();
    SerResult check = ser.classify(audio);
    if (check.label == emotion) {
      SynthesisResult res;
      res.audio = std::move(audio);
      res.attempts = attempt;
      res.ser_score = check.score;
      return res;
    }
  }
  throw ConsistencyError("synthesize_with_retry: emotion '" +
                         std::string(emotion_name(emotion)) +
                         "' not confirmed after " + std::to_string(max_attempts) +
                         " attempt(s)");
}

// ---------------------------------------------------------------------------
// Loudness normalization
// ---------------------------------------------------------------------------

// Scales each segment so its RMS equals the mean RMS of the non-silent
// segments. Silent segments pass through unscaled, which keeps the operation
// idempotent.
inline std::vector<Waveform> normalize_loudness(const std::vector<Waveform>& segments) {
  if (segments.empty())
    throw ValidationError("normalize_loudness: no segments");
  std::vector<double> levels(segments.size());
  double sum = 0.0;
  std::size_t voiced = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].samples.empty())
      throw ValidationError("normalize_loudness: empty segment");
    levels[i] = rms(segments[i]);
    if (levels[i] >= kSilenceRmsEpsilon) {
      sum += levels[i];
      ++voiced;
    }
  }
  if (voiced == 0)
    throw ValidationError("normalize_loudness: all segments below silence epsilon");
  const double target = sum / static_cast<double>(voiced);

  std::vector<Waveform> out;
  out.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    Waveform w = segments[i];
    if (levels[i] >= kSilenceRmsEpsilon) {
      float gain = static_cast<float>(target / levels[i]);
      for (float& v : w.samples) v *= gain;
    }
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concatenation
// ---------------------------------------------------------------------------

// Joins segments end to end. Boundary timestamps come from exact cumulative
// sample counts.
inline std::pair<Waveform, std::vector<TimedSegment>> concatenate(
    const std::vector<Waveform>& segments, const std::vector<EmotionLabel>& emotions) {
  if (segments.empty()) throw ValidationError("concatenate: no segments");
  if (segments.size() != emotions.size())
    throw ValidationError("concatenate: segment/emotion count mismatch");
  int sr = segments.front().sample_rate;
  for (const Waveform& w : segments)
    if (w.sample_rate != sr)
      throw FormatError("concatenate: mixed sample rates");

  Waveform out;
  out.sample_rate = sr;
  std::vector<TimedSegment> timed;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    out.samples.insert(out.samples.end(), segments[i].samples.begin(),
                       segments[i].samples.end());
    std::size_t next = cursor + segments[i].samples.size();
    TimedSegment ts;
    ts.start_s = static_cast<double>(cursor) / sr;
    ts.end_s = static_cast<double>(next) / sr;
    ts.emotion = emotions[i];
    timed.push_back(ts);
    cursor = next;
  }
  return {std::move(out), std::move(timed)};
}

// Optional linear ramp across joins (config speech.join_ramp_ms, default off).
inline void apply_join_ramps(Waveform& audio, const std::vector<TimedSegment>& segments,
                             double ramp_ms) {
  if (ramp_ms <= 0.0 || segments.size() < 2) return;
  std::size_t half = static_cast<std::size_t>(
      std::llround(ramp_ms / 1000.0 * audio.sample_rate / 2.0));
  if (half == 0) return;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    std::size_t join =
        static_cast<std::size_t>(std::llround(segments[i].end_s * audio.sample_rate));
    std::size_t lo = join > half ? join - half : 0;
    std::size_t hi = std::min(audio.samples.size(), join + half);
    for (std::size_t s = lo; s < hi; ++s) {
      double d = std::abs(static_cast<double>(s) - static_cast<double>(join));
      double g = half > 0 ? d / static_cast<double>(half) : 1.0;
      audio.samples[s] *= static_cast<float>(std::min(1.0, g));
    }
  }
}

}  // namespace emotrans
