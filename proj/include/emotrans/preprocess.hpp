#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <utility>
#include <vector>

#include "emotrans/audio.hpp"
#include "emotrans/clients.hpp"
#include "emotrans/error.hpp"

namespace emotrans {

// ---------------------------------------------------------------------------
// Voice activity detection
// ---------------------------------------------------------------------------

struct FrameDecisionSequence {
  int frame_ms = 30;
  std::vector<bool> decisions;  // true = speech; final partial frame dropped
};

// Energy-threshold detector. Aggressiveness 0..3 maps to rising dBFS floors,
// so higher settings discard more low-level material.
inline FrameDecisionSequence vad_classify(const Waveform& audio, int frame_ms,
                                          int aggressiveness) {
  if (frame_ms != 10 && frame_ms != 20 && frame_ms != 30)
    throw FormatError("vad_classify: frame_ms must be 10, 20 or 30");
  int sr = audio.sample_rate;
  if (sr != 8000 && sr != 16000 && sr != 32000 && sr != 48000)
    throw FormatError("vad_classify: unsupported sample rate " + std::to_string(sr));
  if (aggressiveness < 0 || aggressiveness > 3)
    throw RangeError("vad_classify: aggressiveness must be in [0, 3]");

  static constexpr double kThresholdDbfs[4] = {-60.0, -50.0, -40.0, -30.0};
  double threshold = kThresholdDbfs[aggressiveness];

  FrameDecisionSequence out;
  out.frame_ms = frame_ms;
  std::size_t frame_len = static_cast<std::size_t>(sr) * frame_ms / 1000;
  std::size_t n_frames = audio.samples.size() / frame_len;
  out.decisions.reserve(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    double level = rms_dbfs(audio.samples.data() + f * frame_len, frame_len);
    out.decisions.push_back(level >= threshold);
  }
  return out;
}

// Hysteresis automaton over a sliding window. A segment opens once speech
// fills >= trigger_ratio of the window (backdated to the first speech frame
// in the window) and closes once nonspeech does (backdated to the first
// nonspeech frame). Window ratios are evaluated against however many frames
// the window currently holds, so short inputs still trigger.
inline std::vector<std::pair<double, double>> aggregate_segments(
    const FrameDecisionSequence& decisions, int window_frames,
    double trigger_ratio) {
  if (window_frames < 1) throw RangeError("aggregate_segments: window_frames < 1");
  if (!(trigger_ratio > 0.0) || trigger_ratio > 1.0)
    throw RangeError("aggregate_segments: trigger_ratio must be in (0, 1]");

  const double frame_s = decisions.frame_ms / 1000.0;
  std::vector<std::pair<double, double>> out;
  std::deque<std::pair<std::size_t, bool>> window;  // (frame index, decision)
  bool in_speech = false;
  std::size_t seg_start = 0;
  std::size_t speech_in_window = 0;

  for (std::size_t i = 0; i < decisions.decisions.size(); ++i) {
    bool d = decisions.decisions[i];
    window.emplace_back(i, d);
    if (d) ++speech_in_window;
    if (window.size() > static_cast<std::size_t>(window_frames)) {
      if (window.front().second) --speech_in_window;
      window.pop_front();
    }
    double need = trigger_ratio * static_cast<double>(window.size()) - 1e-12;
    if (!in_speech) {
      if (static_cast<double>(speech_in_window) >= need) {
        in_speech = true;
        seg_start = window.front().first;
        for (const auto& [idx, dec] : window) {
          if (dec) { seg_start = idx; break; }
        }
        if (!out.empty()) {
          std::size_t prev_end =
              static_cast<std::size_t>(std::llround(out.back().second / frame_s));
          seg_start = std::max(seg_start, prev_end);
        }
      }
    } else {
      std::size_t nonspeech = window.size() - speech_in_window;
      if (static_cast<double>(nonspeech) >= need) {
        std::size_t seg_end = i + 1;
        for (const auto& [idx, dec] : window) {
          if (!dec && idx >= seg_start) { seg_end = idx; break; }
        }
        if (seg_end > seg_start)
          out.emplace_back(seg_start * frame_s, seg_end * frame_s);
        in_speech = false;
      }
    }
  }
  if (in_speech) {
    std::size_t seg_end = decisions.decisions.size();
    if (seg_end > seg_start) out.emplace_back(seg_start * frame_s, seg_end * frame_s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Silence removal and timeline alignment
// ---------------------------------------------------------------------------

// Piecewise-linear correspondence between the trimmed timeline and the
// original one. Spans are in original-time seconds.
struct AlignmentMap {
  std::vector<std::pair<double, double>> kept_spans;

  double total_kept_s() const {
    double acc = 0.0;
    for (const auto& [a, b] : kept_spans) acc += b - a;
    return acc;
  }

  void validate() const {
    double prev = -1.0;
    for (const auto& [a, b] : kept_spans) {
      if (!(a >= 0.0) || !(b > a))
        throw ValidationError("alignment map: bad span");
      if (a < prev) throw ValidationError("alignment map: overlapping spans");
      prev = b;
    }
  }
};

// Trimmed-domain time -> original-domain time. Boundary instants resolve to
// the earlier span.
inline double map_to_original(const AlignmentMap& align, double t_trimmed) {
  if (t_trimmed < 0.0)
    throw RangeError("map_to_original: t < 0");
  double cum = 0.0;
  for (const auto& [a, b] : align.kept_spans) {
    double len = b - a;
    if (t_trimmed <= cum + len) return a + (t_trimmed - cum);
    cum += len;
  }
  if (t_trimmed <= cum + 1e-9 && !align.kept_spans.empty())
    return align.kept_spans.back().second;
  throw RangeError("map_to_original: t beyond kept duration");
}

// Original-domain time -> trimmed-domain time. Instants inside a removed gap
// collapse onto the gap's trimmed-domain position.
inline double map_to_trimmed(const AlignmentMap& align, double t_original) {
  double cum = 0.0;
  for (const auto& [a, b] : align.kept_spans) {
    if (t_original < a) return cum;
    if (t_original <= b) return cum + (t_original - a);
    cum += b - a;
  }
  return cum;
}

// Concatenates the given spans of the waveform. Also returns the alignment
// from the trimmed timeline back to the original.
inline std::pair<Waveform, AlignmentMap> remove_silence(
    const Waveform& audio, const std::vector<std::pair<double, double>>& segments) {
  Waveform trimmed;
  trimmed.sample_rate = audio.sample_rate;
  AlignmentMap align;
  const auto n = static_cast<long long>(audio.samples.size());
  for (const auto& [start_s, end_s] : segments) {
    long long lo = std::llround(start_s * audio.sample_rate);
    long long hi = std::llround(end_s * audio.sample_rate);
    lo = std::max(0ll, std::min(lo, n));
    hi = std::max(lo, std::min(hi, n));
    if (hi == lo) continue;
    trimmed.samples.insert(trimmed.samples.end(), audio.samples.begin() + lo,
                           audio.samples.begin() + hi);
    align.kept_spans.emplace_back(static_cast<double>(lo) / audio.sample_rate,
                                  static_cast<double>(hi) / audio.sample_rate);
  }
  align.validate();
  return {std::move(trimmed), align};
}

// ---------------------------------------------------------------------------
// Transcription
// ---------------------------------------------------------------------------

// Thin wrapper that turns backend failures into ClientError and checks that
// any provided character timings are monotone.
inline AsrTranscript transcribe(AsrClient& client, const Waveform& audio) {
  AsrTranscript t;
  try {
    t = client.transcribe(audio);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ClientError(std::string("transcription failed: ") + e.what(), {});
  }
  double prev = 0.0;
  for (const CharTiming& ct : t.char_timings) {
    if (ct.start_s < prev - 1e-9 || ct.end_s < ct.start_s - 1e-9)
      throw ClientError("transcription: character timings not monotone", {});
    prev = ct.start_s;
  }
  return t;
}

// Convenience bundle used by the pipeline.
struct PreprocessResult {
  Waveform trimmed;
  AlignmentMap alignment;
  std::vector<std::pair<double, double>> speech_segments;
};

struct VadConfig {
  int frame_ms = 30;
  int aggressiveness = 2;
  int window_frames = 10;
  double trigger_ratio = 0.9;
};

inline PreprocessResult preprocess_audio(const Waveform& audio, const VadConfig& cfg) {
  PreprocessResult r;
  FrameDecisionSequence dec = vad_classify(audio, cfg.frame_ms, cfg.aggressiveness);
  r.speech_segments = aggregate_segments(dec, cfg.window_frames, cfg.trigger_ratio);
  auto [trimmed, align] = remove_silence(audio, r.speech_segments);
  r.trimmed = std::move(trimmed);
  r.alignment = std::move(align);
  return r;
}

}  // namespace emotrans
