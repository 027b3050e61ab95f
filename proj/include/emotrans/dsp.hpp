#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "emotrans/audio.hpp"

namespace emotrans {

// Median of a copy; empty input yields 0.
inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

// Goertzel power of one frequency over a block, normalized by block length.
inline double goertzel_power(const float* x, std::size_t n, double freq_hz,
                             int sample_rate) {
  if (n == 0) return 0.0;
  const double w = 2.0 * M_PI * freq_hz / sample_rate;
  const double coeff = 2.0 * std::cos(w);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s0 = static_cast<double>(x[i]) + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  double power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
  return power / static_cast<double>(n);
}

struct PitchEstimate {
  double freq_hz = 0.0;   // 0 when unvoiced
  double clarity = 0.0;   // peak normalized autocorrelation
};

// Autocorrelation pitch for one frame. Sub-bin accuracy via parabolic
// interpolation; an octave guard prefers the shortest lag whose correlation
// is nearly as strong as the global peak.
inline PitchEstimate estimate_pitch_frame(const float* x, std::size_t n,
                                          int sample_rate,
                                          double fmin_hz = 70.0,
                                          double fmax_hz = 420.0) {
  PitchEstimate out;
  if (n < 8 || sample_rate <= 0) return out;

  std::vector<double> d(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = static_cast<double>(x[i]) - mean;
    energy += d[i] * d[i];
  }
  if (energy < 1e-9) return out;

  std::size_t lag_min = static_cast<std::size_t>(sample_rate / fmax_hz);
  std::size_t lag_max = static_cast<std::size_t>(sample_rate / fmin_hz);
  lag_min = std::max<std::size_t>(lag_min, 2);
  lag_max = std::min(lag_max, n - 2);
  if (lag_min >= lag_max) return out;

  std::vector<double> r(lag_max + 2, 0.0);
  for (std::size_t lag = lag_min > 1 ? lag_min - 1 : lag_min; lag <= lag_max + 1 && lag < n; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += d[i] * d[i + lag];
    r[lag] = acc / energy;
  }

  std::size_t best = lag_min;
  for (std::size_t lag = lag_min; lag <= lag_max; ++lag)
    if (r[lag] > r[best]) best = lag;
  if (r[best] <= 0.0) return out;

  // Octave guard: the shortest strong peak wins.
  for (std::size_t lag = lag_min; lag < best; ++lag) {
    bool is_peak = r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
    if (is_peak && r[lag] >= 0.9 * r[best]) { best = lag; break; }
  }

  double lag_f = static_cast<double>(best);
  if (best > lag_min && best < lag_max) {
    double a = r[best - 1], b = r[best], c = r[best + 1];
    double denom = a - 2.0 * b + c;
    if (std::abs(denom) > 1e-12) {
      double delta = 0.5 * (a - c) / denom;
      if (delta > -0.5 && delta < 0.5) lag_f += delta;
    }
  }
  out.freq_hz = sample_rate / lag_f;
  out.clarity = r[best];
  return out;
}

// Utterance-level pitch: median over voiced frames (40 ms frames, 10 ms hop).
inline PitchEstimate estimate_pitch(const Waveform& audio,
                                    double fmin_hz = 70.0,
                                    double fmax_hz = 420.0) {
  PitchEstimate out;
  const std::size_t frame = static_cast<std::size_t>(audio.sample_rate * 40 / 1000);
  const std::size_t hop = static_cast<std::size_t>(audio.sample_rate * 10 / 1000);
  if (audio.samples.size() < frame || frame == 0 || hop == 0) {
    return estimate_pitch_frame(audio.samples.data(), audio.samples.size(),
                                audio.sample_rate, fmin_hz, fmax_hz);
  }
  std::vector<double> freqs;
  std::vector<double> clarities;
  for (std::size_t off = 0; off + frame <= audio.samples.size(); off += hop) {
    PitchEstimate pe = estimate_pitch_frame(audio.samples.data() + off, frame,
                                            audio.sample_rate, fmin_hz, fmax_hz);
    if (pe.freq_hz > 0.0 && pe.clarity >= 0.5) {
      freqs.push_back(pe.freq_hz);
      clarities.push_back(pe.clarity);
    }
  }
  if (freqs.empty()) return out;
  out.freq_hz = median_of(freqs);
  out.clarity = median_of(clarities);
  return out;
}

// Zero crossing rate of a block, in crossings per sample.
inline double zero_crossing_rate(const float* x, std::size_t n) {
  if (n < 2) return 0.0;
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < n; ++i)
    if ((x[i - 1] >= 0.0f) != (x[i] >= 0.0f)) ++crossings;
  return static_cast<double>(crossings) / static_cast<double>(n - 1);
}

}  // namespace emotrans
