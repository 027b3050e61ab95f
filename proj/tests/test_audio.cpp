#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "emotrans/audio.hpp"
#include "emotrans/rng.hpp"

using namespace emotrans;

namespace {

Waveform sine(double freq, double amp, double seconds, int sr = 16000) {
  Waveform w;
  w.sample_rate = sr;
  std::size_t n = static_cast<std::size_t>(seconds * sr);
  w.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples.push_back(
        static_cast<float>(amp * std::sin(2.0 * M_PI * freq * i / sr)));
  }
  return w;
}

}  // namespace

TEST_CASE("waveform validation") {
  Waveform w = sine(220.0, 0.5, 0.1);
  REQUIRE_NOTHROW(w.validate());
  REQUIRE(w.duration_s() == Catch::Approx(0.1));

  w.samples[3] = std::numeric_limits<float>::infinity();
  REQUIRE_THROWS_AS(w.validate(), NumericError);

  Waveform bad_rate;
  bad_rate.sample_rate = 0;
  REQUIRE_THROWS_AS(bad_rate.validate(), FormatError);
}

TEST_CASE("rms of constant and sine signals") {
  Waveform c;
  c.sample_rate = 16000;
  c.samples.assign(1600, 0.5f);
  REQUIRE(rms(c) == Catch::Approx(0.5).margin(1e-9));

  Waveform s = sine(100.0, 0.4, 1.0);
  REQUIRE(rms(s) == Catch::Approx(0.4 / std::sqrt(2.0)).margin(1e-4));

  Waveform empty;
  REQUIRE(rms(empty) == 0.0);
}

TEST_CASE("rms_dbfs floors at -120") {
  Waveform silent;
  silent.sample_rate = 16000;
  silent.samples.assign(160, 0.0f);
  REQUIRE(rms_dbfs(silent) == -120.0);

  Waveform c;
  c.sample_rate = 16000;
  c.samples.assign(160, 1.0f);
  REQUIRE(rms_dbfs(c) == Catch::Approx(0.0).margin(1e-9));

  c.samples.assign(160, 0.1f);
  REQUIRE(rms_dbfs(c) == Catch::Approx(-20.0).margin(1e-6));
}

TEST_CASE("slicing") {
  Waveform w = sine(100.0, 0.2, 1.0);
  Waveform cut = w.slice_seconds(0.25, 0.75);
  REQUIRE(cut.samples.size() == 8000);
  REQUIRE(cut.sample_rate == w.sample_rate);
  REQUIRE(cut.samples[0] == w.samples[4000]);
}

TEST_CASE("wav encode/decode round trip") {
  Waveform w = sine(440.0, 0.8, 0.05);
  std::string bytes = encode_wav(w);
  Waveform back = decode_wav(bytes);
  REQUIRE(back.sample_rate == w.sample_rate);
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    REQUIRE(std::abs(back.samples[i] - w.samples[i]) < 1.0 / 32767.0 + 1e-6);
  }
}

TEST_CASE("wav encoding is byte stable") {
  Waveform w = sine(440.0, 0.8, 0.05);
  REQUIRE(encode_wav(w) == encode_wav(w));
}

TEST_CASE("wav decode rejects garbage") {
  REQUIRE_THROWS_AS(decode_wav("not a wav file"), FormatError);
  std::string truncated = encode_wav(sine(440.0, 0.5, 0.01)).substr(0, 20);
  REQUIRE_THROWS_AS(decode_wav(truncated), FormatError);
}

TEST_CASE("wav file io") {
  Waveform w = sine(330.0, 0.3, 0.02);
  std::string path = "test_audio_io.wav";
  save_wav(path, w);
  Waveform back = load_wav(path);
  REQUIRE(back.samples.size() == w.samples.size());
  std::remove(path.c_str());
}
