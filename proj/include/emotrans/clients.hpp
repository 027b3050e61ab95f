#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "emotrans/audio.hpp"
#include "emotrans/core.hpp"
#include "emotrans/features.hpp"

// Abstract interfaces for the external models the pipeline leans on.
// Every stage takes one of these by reference, so a network-backed
// implementation and the built-in deterministic fallbacks are
// interchangeable. Fallback implementations live in fallback_clients.hpp,
// HTTP-backed ones in http_clients.hpp.

namespace emotrans {

// ---------------------------------------------------------------------------
// Text generation
// ---------------------------------------------------------------------------

class TextGenClient {
 public:
  virtual ~TextGenClient() = default;

  // Returns one sentence per line requested by the prompt. The seed makes
  // repeated calls reproducible where the backend supports it.
  virtual std::vector<std::string> generate(const std::string& prompt,
                                            Language language,
                                            std::uint64_t seed) = 0;
};

// ---------------------------------------------------------------------------
// Speech synthesis
// ---------------------------------------------------------------------------

class TtsClient {
 public:
  virtual ~TtsClient() = default;

  // Synthesizes `text` in the style of the reference utterance identified by
  // `reference_key` (speaker + emotion prompt audio).
  virtual Waveform synthesize(const std::string& text,
                              const std::string& reference_key,
                              std::uint64_t seed) = 0;
};

// ---------------------------------------------------------------------------
// Speech emotion recognition (used to verify synthesized segments)
// ---------------------------------------------------------------------------

struct SerResult {
  EmotionLabel label = EmotionLabel::kNeutral;
  double score = 0.0;  // confidence in [0, 1]
};

class SerClient {
 public:
  virtual ~SerClient() = default;
  virtual SerResult classify(const Waveform& audio) = 0;
};

// ---------------------------------------------------------------------------
// Speech recognition with character-level timings
// ---------------------------------------------------------------------------

struct CharTiming {
  std::string character;  // one UTF-8 character
  double start_s = 0.0;
  double end_s = 0.0;
};

struct AsrTranscript {
  std::string text;
  std::vector<CharTiming> char_timings;
};

class AsrClient {
 public:
  virtual ~AsrClient() = default;
  virtual AsrTranscript transcribe(const Waveform& audio) = 0;
};

// ---------------------------------------------------------------------------
// Utterance-level emotion embeddings
// ---------------------------------------------------------------------------

struct EmbeddingVector {
  std::vector<float> values;

  double dot(const EmbeddingVector& other) const {
    if (values.size() != other.values.size())
      throw ValidationError("embedding: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      acc += static_cast<double>(values[i]) * static_cast<double>(other.values[i]);
    return acc;
  }

  double norm() const {
    double acc = 0.0;
    for (float v : values) acc += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(acc);
  }
};

class EmbedderClient {
 public:
  virtual ~EmbedderClient() = default;
  virtual EmbeddingVector embed(const Waveform& audio) = 0;
};

// ---------------------------------------------------------------------------
// Frame-level feature extraction (detector front end)
// ---------------------------------------------------------------------------

class FeatureClient {
 public:
  virtual ~FeatureClient() = default;
  virtual FeatureSequence extract(const Waveform& audio) = 0;
};

// ---------------------------------------------------------------------------
// Caption generation (multimodal or text-only backends)
// ---------------------------------------------------------------------------

class CaptionClient {
 public:
  virtual ~CaptionClient() = default;

  // Returns the raw model completion for an annotation prompt.
  virtual std::string complete(const std::string& prompt, std::uint64_t seed) = 0;
};

}  // namespace emotrans
