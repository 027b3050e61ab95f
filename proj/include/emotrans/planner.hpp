#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emotrans/clients.hpp"
#include "emotrans/core.hpp"
#include "emotrans/error.hpp"
#include "emotrans/rng.hpp"

namespace emotrans {

// ---------------------------------------------------------------------------
// Topic hierarchy
// ---------------------------------------------------------------------------

// Two-level topic tree: primary category -> secondary topics.
struct TopicHierarchy {
  std::vector<std::string> primary;
  std::map<std::string, std::vector<std::string>> secondary;

  void validate() const {
    if (primary.empty()) throw ValidationError("topic hierarchy: no primary categories");
    for (const auto& p : primary) {
      auto it = secondary.find(p);
      if (it == secondary.end() || it->second.empty())
        throw ValidationError("topic hierarchy: primary '" + p +
                              "' has no secondary topics");
    }
  }

  std::size_t total_secondary() const {
    std::size_t n = 0;
    for (const auto& [p, subs] : secondary) {
      if (std::find(primary.begin(), primary.end(), p) != primary.end())
        n += subs.size();
    }
    return n;
  }

  // Deterministic pick: a seeded draw of (primary, secondary).
  std::pair<std::string, std::string> pick(Rng& rng) const {
    validate();
    const std::string& p = primary[rng.uniform_index(primary.size())];
    const auto& subs = secondary.at(p);
    return {p, subs[rng.uniform_index(subs.size())]};
  }
};

// Built-in hierarchy covering the seven discourse categories. Ships with a
// handful of secondary topics each; deployments extend this via the topics
// config file.
inline TopicHierarchy default_topic_hierarchy() {
  TopicHierarchy h;
  h.primary = {"Business", "Culture",  "Daily Life", "Entertainment",
               "Politics", "Science", "Sports"};
  h.secondary["Business"] = {"a product launch", "quarterly earnings",
                             "a startup pitch", "a contract negotiation",
                             "a market downturn"};
  h.secondary["Culture"] = {"a museum exhibition", "a folk festival",
                            "a new novel", "an old family recipe",
                            "a local tradition"};
  h.secondary["Daily Life"] = {"the morning commute", "a neighborhood picnic",
                               "grocery shopping", "a home renovation",
                               "a lost umbrella"};
  h.secondary["Entertainment"] = {"a blockbuster premiere", "a music festival",
                                  "a talent show final", "a video game release",
                                  "a celebrity interview"};
  h.secondary["Politics"] = {"an election debate", "a new city ordinance",
                             "a budget vote", "a town hall meeting",
                             "a policy reform"};
  h.secondary["Science"] = {"a rover landing", "a vaccine trial",
                            "a fusion experiment", "a deep-sea expedition",
                            "a telescope discovery"};
  h.secondary["Sports"] = {"the championship final", "a marathon",
                           "a transfer rumor", "an underdog victory",
                           "a record attempt"};
  return h;
}

// ---------------------------------------------------------------------------
// Transition plan enumeration
// ---------------------------------------------------------------------------

// All emotion sequences of length k+1 over `alphabet` whose adjacent entries
// differ, in lexicographic order of the emotion names. |A| * (|A|-1)^k plans.
inline std::vector<TransitionPlan> enumerate_transition_plans(
    std::vector<EmotionLabel> alphabet, int transitions) {
  if (transitions < 0) throw RangeError("enumerate_transition_plans: transitions < 0");
  std::sort(alphabet.begin(), alphabet.end(),
            [](EmotionLabel a, EmotionLabel b) {
              return std::string_view(emotion_name(a)) < emotion_name(b);
            });
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
  if (alphabet.empty()) throw RangeError("enumerate_transition_plans: empty alphabet");
  if (transitions >= 1 && alphabet.size() < 2)
    throw RangeError("enumerate_transition_plans: need >= 2 emotions for transitions");

  std::vector<TransitionPlan> out;
  std::vector<EmotionLabel> cur;
  cur.reserve(static_cast<std::size_t>(transitions) + 1);

  auto walk = [&](auto&& self, int remaining) -> void {
    if (remaining == 0) {
      out.push_back(TransitionPlan{cur});
      return;
    }
    for (EmotionLabel e : alphabet) {
      if (!cur.empty() && cur.back() == e) continue;
      cur.push_back(e);
      self(self, remaining - 1);
      cur.pop_back();
    }
  };
  walk(walk, transitions + 1);
  return out;
}

inline std::vector<TransitionPlan> enumerate_transition_plans(int transitions) {
  auto a = all_emotions();
  return enumerate_transition_plans(
      std::vector<EmotionLabel>(a.begin(), a.end()), transitions);
}

// ---------------------------------------------------------------------------
// Discourse generation
// ---------------------------------------------------------------------------

enum class Perspective { kFirst = 0, kSecond = 1, kThird = 2 };

inline const char* perspective_name(Perspective p) {
  switch (p) {
    case Perspective::kFirst: return "first-person";
    case Perspective::kSecond: return "second-person";
    case Perspective::kThird: return "third-person";
  }
  throw RangeError("perspective_name: bad value");
}

inline Perspective parse_perspective(const std::string& s) {
  if (s == "first-person") return Perspective::kFirst;
  if (s == "second-person") return Perspective::kSecond;
  if (s == "third-person") return Perspective::kThird;
  throw ParseError("parse_perspective: unknown perspective '" + s + "'");
}

struct GenerationRequest {
  std::pair<std::string, std::string> topic;  // primary, secondary
  TransitionPlan plan;
  Perspective perspective = Perspective::kFirst;
  Language language = Language::kEn;
  std::uint64_t seed = 0;

  void validate() const {
    plan.validate();
    if (topic.first.empty() || topic.second.empty())
      throw ValidationError("generation request: empty topic");
  }
};

// Deterministic prompt for the text generation backend. The per-sentence
// emotion lines are machine-readable so the template fallback can recover
// the plan from the prompt alone.
inline std::string build_generation_prompt(const GenerationRequest& req) {
  req.validate();
  std::ostringstream os;
  os << "You are writing a short spoken discourse for a speech corpus.\n";
  os << "Language: " << (req.language == Language::kEn ? "English" : "Chinese") << "\n";
  os << "Topic: " << req.topic.first << " / " << req.topic.second << "\n";
  os << "Perspective: " << perspective_name(req.perspective) << "\n";
  os << "Write exactly " << req.plan.emotions.size()
     << " sentence(s), one per line, with these emotions in order:\n";
  for (std::size_t i = 0; i < req.plan.emotions.size(); ++i) {
    os << "Sentence " << (i + 1)
       << " emotion: " << emotion_name(req.plan.emotions[i]) << "\n";
  }
  if (req.language == Language::kZh)
    os << "Write the sentences in Mandarin Chinese.\n";
  os << "Each sentence must read naturally, stay on topic, and convey its "
        "emotion through wording alone. Return only the sentences, one per "
        "line, with no numbering.";
  return os.str();
}

// Calls the backend, validates the shape of the reply, and retries with a
// fresh derived seed on failure. Throws ClientError carrying one entry per
// failed attempt once the retry budget is spent.
inline std::vector<std::string> generate_discourse(TextGenClient& client,
                                                   const GenerationRequest& req,
                                                   int retry_limit = 3) {
  req.validate();
  if (retry_limit < 1) throw RangeError("generate_discourse: retry_limit < 1");
  const std::string prompt = build_generation_prompt(req);
  std::vector<std::string> attempts;
  for (int attempt = 0; attempt < retry_limit; ++attempt) {
    std::uint64_t seed = mix_seed(req.seed, static_cast<std::uint64_t>(attempt));
    std::vector<std::string> lines;
    try {
      lines = client.generate(prompt, req.language, seed);
    } catch (const std::exception& e) {
      attempts.push_back(std::string("attempt ") + std::to_string(attempt + 1) +
                         ": backend error: " + e.what());
      continue;
    }
    if (lines.size() != req.plan.emotions.size()) {
      attempts.push_back("attempt " + std::to_string(attempt + 1) + ": got " +
                         std::to_string(lines.size()) + " sentence(s), expected " +
                         std::to_string(req.plan.emotions.size()));
      continue;
    }
    bool blank = false;
    for (const auto& l : lines) {
      if (l.find_first_not_of(" \t\r\n") == std::string::npos) { blank = true; break; }
    }
    if (blank) {
      attempts.push_back("attempt " + std::to_string(attempt + 1) + ": blank sentence");
      continue;
    }
    return lines;
  }
  throw ClientError("text generation failed after " + std::to_string(retry_limit) +
                        " attempt(s)",
                    attempts);
}

}  // namespace emotrans
