#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "emotrans/audio.hpp"
#include "emotrans/core.hpp"
#include "emotrans/dsp.hpp"
#include "emotrans/error.hpp"
#include "emotrans/text.hpp"

namespace emotrans {

inline constexpr double kEnergyFloorDbfs = -120.0;

// Category boundaries are half-open: [*, low) / [low, high) / [high, *).
// Energy defaults are placeholders for corpus tertiles (see
// energy_tertiles()); the others follow common speaking-style ranges.
struct AttributeThresholds {
  double pitch_low_hz = 140.0;
  double pitch_high_hz = 220.0;
  double energy_low_db = -20.0;
  double energy_high_db = -10.0;
  double speed_slow_en = 2.5;
  double speed_fast_en = 4.0;
  double speed_slow_zh = 3.5;
  double speed_fast_zh = 5.5;

  bool operator==(const AttributeThresholds&) const = default;

  void validate() const {
    if (!(pitch_low_hz < pitch_high_hz) || !(energy_low_db < energy_high_db) ||
        !(speed_slow_en < speed_fast_en) || !(speed_slow_zh < speed_fast_zh))
      throw ConfigError("attribute thresholds: low bound must be below high bound");
  }
};

// Mean F0 over voiced frames (40 ms frames, 10 ms hop, clarity >= 0.5),
// normalized autocorrelation in the 60-400 Hz band.
inline double estimate_pitch_mean(const Waveform& audio, double fmin_hz = 60.0,
                                  double fmax_hz = 400.0) {
  audio.validate();
  const std::size_t frame = static_cast<std::size_t>(audio.sample_rate * 40 / 1000);
  const std::size_t hop = static_cast<std::size_t>(audio.sample_rate * 10 / 1000);

  std::vector<double> voiced;
  if (audio.samples.size() < frame || frame == 0 || hop == 0) {
    PitchEstimate pe = estimate_pitch_frame(audio.samples.data(), audio.samples.size(),
                                            audio.sample_rate, fmin_hz, fmax_hz);
    if (pe.freq_hz > 0.0 && pe.clarity >= 0.5) voiced.push_back(pe.freq_hz);
  } else {
    for (std::size_t off = 0; off + frame <= audio.samples.size(); off += hop) {
      PitchEstimate pe = estimate_pitch_frame(audio.samples.data() + off, frame,
                                              audio.sample_rate, fmin_hz, fmax_hz);
      if (pe.freq_hz > 0.0 && pe.clarity >= 0.5) voiced.push_back(pe.freq_hz);
    }
  }
  if (voiced.empty()) throw ValidationError("estimate_pitch_mean: unvoiced signal");
  double sum = 0.0;
  for (double f : voiced) sum += f;
  return sum / static_cast<double>(voiced.size());
}

// Mean RMS level in dBFS, floored at -120 for silence.
inline double estimate_energy(const Waveform& audio) {
  if (audio.samples.empty()) throw ValidationError("estimate_energy: empty waveform");
  double level = rms(audio);
  if (level <= 0.0) return kEnergyFloorDbfs;
  return std::max(kEnergyFloorDbfs, 20.0 * std::log10(level));
}

struct SpeedEstimate {
  double units_per_s = 0.0;
  bool empty_transcript = false;
};

// Words/s (en) or CJK characters/s (zh).
inline SpeedEstimate estimate_speed(const std::string& transcript, double duration_s,
                                    Language language) {
  if (!(duration_s > 0.0)) throw RangeError("estimate_speed: duration must be > 0");
  SpeedEstimate out;
  std::size_t units = count_units(transcript, language == Language::kZh);
  if (units == 0) {
    out.empty_transcript = true;
    return out;
  }
  out.units_per_s = static_cast<double>(units) / duration_s;
  return out;
}

inline LevelCategory categorize_pitch(double hz, const AttributeThresholds& th = {}) {
  if (hz < th.pitch_low_hz) return LevelCategory::kLow;
  if (hz < th.pitch_high_hz) return LevelCategory::kMedium;
  return LevelCategory::kHigh;
}

inline LevelCategory categorize_energy(double db, const AttributeThresholds& th = {}) {
  if (db < th.energy_low_db) return LevelCategory::kLow;
  if (db < th.energy_high_db) return LevelCategory::kMedium;
  return LevelCategory::kHigh;
}

inline SpeedCategory categorize_speed(double ups, Language language,
                                      const AttributeThresholds& th = {}) {
  double slow = language == Language::kZh ? th.speed_slow_zh : th.speed_slow_en;
  double fast = language == Language::kZh ? th.speed_fast_zh : th.speed_fast_en;
  if (ups < slow) return SpeedCategory::kSlow;
  if (ups < fast) return SpeedCategory::kMedium;
  return SpeedCategory::kFast;
}

// Corpus tertile boundaries (1/3 and 2/3 quantiles) for data-driven energy
// thresholds.
inline std::pair<double, double> energy_tertiles(std::vector<double> levels_db) {
  if (levels_db.size() < 3)
    throw ValidationError("energy_tertiles: need at least 3 values");
  std::sort(levels_db.begin(), levels_db.end());
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(levels_db.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, levels_db.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return levels_db[lo] * (1.0 - frac) + levels_db[hi] * frac;
  };
  return {quantile(1.0 / 3.0), quantile(2.0 / 3.0)};
}

// Raw per-segment measurements before categorization.
struct SegmentAnalysis {
  double start_s = 0.0;
  double end_s = 0.0;
  EmotionLabel emotion = EmotionLabel::kNeutral;
  std::string transcript;
  double pitch_hz = 0.0;  // 0 when unvoiced
  double energy_db = kEnergyFloorDbfs;
  double speed_ups = 0.0;
  bool empty_transcript = false;
};

// Measures one segment's audio slice against its transcript.
inline SegmentAnalysis analyze_segment(const Waveform& segment_audio,
                                       const std::string& transcript,
                                       Language language) {
  SegmentAnalysis a;
  a.transcript = transcript;
  try {
    a.pitch_hz = estimate_pitch_mean(segment_audio);
  } catch (const ValidationError&) {
    a.pitch_hz = 0.0;  // unvoiced; categorized as low
  }
  a.energy_db = estimate_energy(segment_audio);
  double dur = static_cast<double>(segment_audio.samples.size()) /
               static_cast<double>(segment_audio.sample_rate);
  SpeedEstimate sp = estimate_speed(transcript, dur, language);
  a.speed_ups = sp.units_per_s;
  a.empty_transcript = sp.empty_transcript;
  return a;
}

// Assembles the ordered attribute sequence. Analyses may arrive in any order;
// they are sorted by start time and checked against the manifest plan.
inline AttributeSequence build_attribute_sequence(const UtteranceManifest& manifest,
                                                  std::vector<SegmentAnalysis> analyses,
                                                  const SpeakerProfile& profile,
                                                  const AttributeThresholds& th = {}) {
  th.validate();
  if (analyses.empty())
    throw ValidationError("attribute sequence: no segment analyses");
  std::sort(analyses.begin(), analyses.end(),
            [](const SegmentAnalysis& a, const SegmentAnalysis& b) {
              return a.start_s < b.start_s;
            });

  TransitionPlan realized;
  for (const auto& a : analyses) realized.emotions.push_back(a.emotion);
  if (collapse_adjacent(realized.emotions) != manifest.plan.emotions)
    throw ConsistencyError("attribute sequence: analysis emotions do not align with the plan");

  AttributeSequence seq;
  seq.profile = profile;
  for (const auto& a : analyses) {
    SegmentAttributes s;
    s.pitch_hz = a.pitch_hz;
    s.pitch_cat = categorize_pitch(a.pitch_hz, th);
    s.energy_db = a.energy_db;
    s.energy_cat = categorize_energy(a.energy_db, th);
    s.speed_ups = a.speed_ups;
    s.speed_cat = categorize_speed(a.speed_ups, manifest.language, th);
    s.emotion = a.emotion;
    s.start_s = a.start_s;
    s.end_s = a.end_s;
    s.transcript = a.transcript;
    seq.segments.push_back(std::move(s));
  }
  return seq;
}

}  // namespace emotrans
