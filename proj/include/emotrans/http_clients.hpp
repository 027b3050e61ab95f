#pragma once

// HTTP-backed implementations of the model-client interfaces. Every client
// POSTs one JSON document and reads one back; audio crosses the wire as
// base64 WAV and feature matrices as base64 float32, so payloads survive the
// trip bit for bit. The request/response codecs are pure functions so they
// can be tested without sockets.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <httplib.h>

// glibc's resolv.h (dragged in by httplib's socket headers) defines _res as
// a macro, which breaks Eigen's use of _res as a parameter name.
#ifdef _res
#undef _res
#endif

#include <nlohmann/json.hpp>

#include "emotrans/audio.hpp"
#include "emotrans/clients.hpp"
#include "emotrans/config.hpp"
#include "emotrans/core.hpp"
#include "emotrans/error.hpp"
#include "emotrans/features.hpp"

namespace emotrans {

namespace detail {

inline constexpr char kBase64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < bytes.size()) {
    std::uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                      (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                      static_cast<unsigned char>(bytes[i + 2]);
    out += kBase64Chars[(n >> 18) & 63];
    out += kBase64Chars[(n >> 12) & 63];
    out += kBase64Chars[(n >> 6) & 63];
    out += kBase64Chars[n & 63];
    i += 3;
  }
  std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    std::uint32_t n = static_cast<unsigned char>(bytes[i]) << 16;
    out += kBase64Chars[(n >> 18) & 63];
    out += kBase64Chars[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    std::uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                      (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += kBase64Chars[(n >> 18) & 63];
    out += kBase64Chars[(n >> 12) & 63];
    out += kBase64Chars[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

inline int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

inline std::string base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw FormatError("base64: length must be a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw FormatError("base64: stray padding");
        vals[k] = 0;
        ++pad;
      } else {
        if (pad > 0) throw FormatError("base64: data after padding");
        vals[k] = base64_value(c);
        if (vals[k] < 0) throw FormatError("base64: invalid character");
      }
    }
    std::uint32_t n = (static_cast<std::uint32_t>(vals[0]) << 18) |
                      (static_cast<std::uint32_t>(vals[1]) << 12) |
                      (static_cast<std::uint32_t>(vals[2]) << 6) |
                      static_cast<std::uint32_t>(vals[3]);
    out += static_cast<char>((n >> 16) & 0xff);
    if (pad < 2) out += static_cast<char>((n >> 8) & 0xff);
    if (pad < 1) out += static_cast<char>(n & 0xff);
  }
  return out;
}

inline std::string pack_f32(const std::vector<float>& values) {
  static_assert(sizeof(float) == 4);
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &values[i], 4);
    bytes[4 * i + 0] = static_cast<char>(bits & 0xff);
    bytes[4 * i + 1] = static_cast<char>((bits >> 8) & 0xff);
    bytes[4 * i + 2] = static_cast<char>((bits >> 16) & 0xff);
    bytes[4 * i + 3] = static_cast<char>((bits >> 24) & 0xff);
  }
  return bytes;
}

inline std::vector<float> unpack_f32(const std::string& bytes) {
  if (bytes.size() % 4 != 0) throw FormatError("float payload: truncated");
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = static_cast<unsigned char>(bytes[4 * i]) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + 1]))
                          << 8) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + 2]))
                          << 16) |
                         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + 3]))
                          << 24);
    std::memcpy(&values[i], &bits, 4);
  }
  return values;
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  if (!j.is_object() || !j.contains(name))
    throw ClientError(std::string("client response: missing field '") + name + "'");
  return j.at(name);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Request/response codecs
// ---------------------------------------------------------------------------

inline nlohmann::json encode_audio_payload(const Waveform& audio) {
  return nlohmann::json{{"wav_base64", detail::base64_encode(encode_wav(audio))}};
}

inline Waveform decode_audio_payload(const nlohmann::json& j) {
  try {
    return decode_wav(detail::base64_decode(
        detail::field(j, "wav_base64").get<std::string>()));
  } catch (const ClientError&) {
    throw;
  } catch (const std::exception& e) {
    throw ClientError(std::string("client response: bad audio payload: ") + e.what());
  }
}

inline nlohmann::json textgen_request(const std::string& prompt, Language language,
                                      std::uint64_t seed) {
  return nlohmann::json{
      {"prompt", prompt}, {"language", language_code(language)}, {"seed", seed}};
}

inline std::vector<std::string> parse_textgen_response(const nlohmann::json& j) {
  const auto& arr = detail::field(j, "sentences");
  if (!arr.is_array()) throw ClientError("textgen response: 'sentences' must be an array");
  std::vector<std::string> out;
  for (const auto& item : arr) {
    if (!item.is_string()) throw ClientError("textgen response: non-string sentence");
    out.push_back(item.get<std::string>());
  }
  return out;
}

inline nlohmann::json tts_request(const std::string& text, const std::string& reference_key,
                                  std::uint64_t seed) {
  return nlohmann::json{{"text", text}, {"reference_key", reference_key}, {"seed", seed}};
}

inline Waveform parse_tts_response(const nlohmann::json& j) {
  return decode_audio_payload(j);
}

inline SerResult parse_ser_response(const nlohmann::json& j) {
  SerResult r;
  try {
    r.label = parse_emotion_or_throw(detail::field(j, "label").get<std::string>());
  } catch (const ClientError&) {
    throw;
  } catch (const std::exception& e) {
    throw ClientError(std::string("ser response: bad label: ") + e.what());
  }
  const auto& score = detail::field(j, "score");
  if (!score.is_number()) throw ClientError("ser response: 'score' must be a number");
  r.score = score.get<double>();
  return r;
}

inline AsrTranscript parse_asr_response(const nlohmann::json& j) {
  AsrTranscript t;
  const auto& text = detail::field(j, "text");
  if (!text.is_string()) throw ClientError("asr response: 'text' must be a string");
  t.text = text.get<std::string>();
  if (j.contains("char_timings")) {
    const auto& arr = j.at("char_timings");
    if (!arr.is_array()) throw ClientError("asr response: 'char_timings' must be an array");
    for (const auto& item : arr) {
      CharTiming ct;
      const auto& ch = detail::field(item, "character");
      if (!ch.is_string()) throw ClientError("asr response: timing character must be a string");
      ct.character = ch.get<std::string>();
      const auto& a = detail::field(item, "start_s");
      const auto& b = detail::field(item, "end_s");
      if (!a.is_number() || !b.is_number())
        throw ClientError("asr response: timing bounds must be numbers");
      ct.start_s = a.get<double>();
      ct.end_s = b.get<double>();
      t.char_timings.push_back(ct);
    }
  }
  return t;
}

inline EmbeddingVector parse_embed_response(const nlohmann::json& j) {
  const auto& arr = detail::field(j, "values");
  if (!arr.is_array() || arr.empty())
    throw ClientError("embed response: 'values' must be a non-empty array");
  EmbeddingVector v;
  for (const auto& item : arr) {
    if (!item.is_number()) throw ClientError("embed response: non-numeric value");
    v.values.push_back(item.get<float>());
  }
  return v;
}

inline nlohmann::json encode_feature_response(const FeatureSequence& f) {
  std::vector<float> flat;
  flat.reserve(static_cast<std::size_t>(f.frames.size()));
  for (Eigen::Index r = 0; r < f.frames.rows(); ++r)
    for (Eigen::Index c = 0; c < f.frames.cols(); ++c)
      flat.push_back(f.frames(r, c));
  return nlohmann::json{{"frame_rate", f.frame_rate},
                        {"dim", f.frames.cols()},
                        {"frames_base64", detail::base64_encode(detail::pack_f32(flat))}};
}

inline FeatureSequence parse_feature_response(const nlohmann::json& j) {
  FeatureSequence f;
  const auto& rate = detail::field(j, "frame_rate");
  const auto& dim = detail::field(j, "dim");
  if (!rate.is_number() || !dim.is_number_integer())
    throw ClientError("feature response: bad frame_rate/dim");
  f.frame_rate = rate.get<double>();
  long cols = dim.get<long>();
  if (cols < 1) throw ClientError("feature response: dim must be >= 1");
  std::vector<float> flat;
  try {
    flat = detail::unpack_f32(detail::base64_decode(
        detail::field(j, "frames_base64").get<std::string>()));
  } catch (const ClientError&) {
    throw;
  } catch (const std::exception& e) {
    throw ClientError(std::string("feature response: bad frame payload: ") + e.what());
  }
  if (flat.size() % static_cast<std::size_t>(cols) != 0)
    throw ClientError("feature response: frame payload not a multiple of dim");
  long rows = static_cast<long>(flat.size()) / cols;
  f.frames.resize(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c)
      f.frames(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return f;
}

inline nlohmann::json caption_request(const std::string& prompt, std::uint64_t seed) {
  return nlohmann::json{{"prompt", prompt}, {"seed", seed}};
}

inline std::string parse_caption_response(const nlohmann::json& j) {
  const auto& text = detail::field(j, "text");
  if (!text.is_string()) throw ClientError("caption response: 'text' must be a string");
  return text.get<std::string>();
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

class HttpTransport {
 public:
  explicit HttpTransport(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw ConfigError("http client: empty endpoint");
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
    httplib::Client cli(cfg_.endpoint);
    auto whole = static_cast<time_t>(cfg_.timeout_s);
    auto micros = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(whole)) * 1e6);
    cli.set_connection_timeout(whole, micros);
    cli.set_read_timeout(whole, micros);
    cli.set_write_timeout(whole, micros);

    httplib::Result res = cli.Post(path, body.dump(), "application/json");
    if (!res)
      throw ClientError("http: no response from " + cfg_.endpoint + path + " (" +
                        httplib::to_string(res.error()) + ")");
    if (res->status != 200)
      throw ClientError("http: " + cfg_.endpoint + path + " returned status " +
                        std::to_string(res->status));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw ClientError(std::string("http: response is not valid JSON: ") + e.what());
    }
  }

  const EndpointConfig& config() const { return cfg_; }

 private:
  EndpointConfig cfg_;
};

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

class HttpTextGenClient : public TextGenClient {
 public:
  explicit HttpTextGenClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}

  std::vector<std::string> generate(const std::string& prompt, Language language,
                                    std::uint64_t seed) override {
    return parse_textgen_response(
        transport_.post("/v1/generate", textgen_request(prompt, language, seed)));
  }

 private:
  HttpTransport transport_;
};

class HttpTtsClient : public TtsClient {
 public:
  explicit HttpTtsClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}

  Waveform synthesize(const std::string& text, const std::string& reference_key,
                      std::uint64_t seed) override {
    return parse_tts_response(
        transport_.post("/v1/synthesize", tts_request(text, reference_key, seed)));
  }

 private:
  HttpTransport transport_;
};

class HttpSerClient : public SerClient {
 public:
  explicit HttpSerClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}

  SerResult classify(const Waveform& audio) override {
    return parse_ser_response(transport_.post("/v1/classify", encode_audio_payload(audio)));
  }

 private:
  HttpTransport transport_;
};

class HttpAsrClient : public AsrClient {
 public:
  explicit HttpAsrClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}

  AsrTranscript transcribe(const Waveform& audio) override {
    return parse_asr_response(transport_.post("/v1/transcribe", encode_audio_payload(audio)));
  }

 private:
  HttpTransport transport_;
};

class HttpEmbedderClient : public EmbedderClient {
 public:
  explicit HttpEmbedderClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}

  EmbeddingVector embed(const Waveform& audio) override {
    return parse_embed_response(transport_.post("/v1/embed", encode_audio_payload(audio)));
  }

 private:
  HttpTransport transport_;
};

class HttpFeatureClient : public FeatureClient {
 public:
  explicit HttpFeatureClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}

  FeatureSequence extract(const Waveform& audio) override {
    return parse_feature_response(transport_.post("/v1/extract", encode_audio_payload(audio)));
  }

 private:
  HttpTransport transport_;
};

class HttpCaptionClient : public CaptionClient {
 public:
  explicit HttpCaptionClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}

  std::string complete(const std::string& prompt, std::uint64_t seed) override {
    return parse_caption_response(transport_.post("/v1/complete", caption_request(prompt, seed)));
  }

 private:
  HttpTransport transport_;
};

}  // namespace emotrans
