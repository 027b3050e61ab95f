#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "emotrans/error.hpp"

namespace emotrans {

// Mono float audio in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }

  bool empty() const { return samples.empty(); }

  void validate() const {
    if (sample_rate <= 0) throw FormatError("waveform: sample_rate must be > 0");
    for (float s : samples) {
      if (!std::isfinite(s)) throw NumericError("waveform: non-finite sample");
    }
  }

  Waveform slice_samples(std::size_t begin, std::size_t end) const {
    if (begin > end || end > samples.size()) throw RangeError("waveform slice out of bounds");
    return {std::vector<float>(samples.begin() + begin, samples.begin() + end), sample_rate};
  }

  Waveform slice_seconds(double start_s, double end_s) const {
    auto b = static_cast<std::size_t>(std::llround(start_s * sample_rate));
    auto e = static_cast<std::size_t>(std::llround(end_s * sample_rate));
    b = std::min(b, samples.size());
    e = std::min(std::max(e, b), samples.size());
    return slice_samples(b, e);
  }
};

inline double rms(const float* data, std::size_t n) {
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(data[i]) * data[i];
  return std::sqrt(acc / static_cast<double>(n));
}

inline double rms(const Waveform& w) { return rms(w.samples.data(), w.samples.size()); }

// dBFS with a -120 dB floor for silence.
inline double rms_dbfs(const float* data, std::size_t n, double floor_db = -120.0) {
  double r = rms(data, n);
  if (r <= 0.0) return floor_db;
  return std::max(floor_db, 20.0 * std::log10(r));
}

inline double rms_dbfs(const Waveform& w, double floor_db = -120.0) {
  return rms_dbfs(w.samples.data(), w.samples.size(), floor_db);
}

// =============================================================================
// WAV I/O (16-bit PCM, mono)
// =============================================================================

namespace detail {
inline void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
}  // namespace detail

inline std::string encode_wav(const Waveform& w) {
  std::string out;
  std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate * 2));
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, data_bytes);
  for (float s : w.samples) {
    float c = std::min(1.0f, std::max(-1.0f, s));
    auto v = static_cast<std::int16_t>(std::lrintf(c * 32767.0f));
    detail::put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

inline Waveform decode_wav(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 44 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
  Waveform w;
  bool got_data = false;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t chunk_size = detail::get_u32(p + pos + 4);
    if (std::memcmp(p + pos, "fmt ", 4) == 0 && pos + 8 + 16 <= bytes.size()) {
      int format = detail::get_u16(p + pos + 8);
      channels = detail::get_u16(p + pos + 10);
      sample_rate = static_cast<int>(detail::get_u32(p + pos + 12));
      bits = detail::get_u16(p + pos + 22);
      if (format != 1) throw FormatError("wav: only PCM format supported");
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      if (channels != 1 || bits != 16) throw FormatError("wav: expected 16-bit mono PCM");
      std::size_t n = std::min<std::size_t>(chunk_size, bytes.size() - pos - 8) / 2;
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto v = static_cast<std::int16_t>(detail::get_u16(p + pos + 8 + 2 * i));
        w.samples[i] = static_cast<float>(v) / 32767.0f;
      }
      got_data = true;
    }
    pos += 8 + chunk_size + (chunk_size & 1);
  }
  if (!got_data) throw FormatError("wav: missing data chunk");
  w.sample_rate = sample_rate;
  return w;
}

inline void save_wav(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open wav file for writing: " + path);
  auto bytes = encode_wav(w);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Waveform load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open wav file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

}  // namespace emotrans
