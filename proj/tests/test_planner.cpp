#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "emotrans/fallback_clients.hpp"
#include "emotrans/planner.hpp"

using namespace emotrans;
using E = EmotionLabel;

namespace {

// Independent count: sequences of length k+1 over the alphabet with distinct
// neighbors, counted by full cartesian enumeration.
std::size_t brute_force_count(int alphabet, int transitions) {
  std::size_t len = static_cast<std::size_t>(transitions) + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < len; ++i) total *= static_cast<std::size_t>(alphabet);
  std::size_t count = 0;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    int prev = -1;
    bool ok = true;
    for (std::size_t i = 0; i < len; ++i) {
      int digit = static_cast<int>(c % static_cast<std::size_t>(alphabet));
      c /= static_cast<std::size_t>(alphabet);
      if (digit == prev) { ok = false; break; }
      prev = digit;
    }
    if (ok) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("plan counts for the five-emotion alphabet") {
  REQUIRE(enumerate_transition_plans(0).size() == 5);
  REQUIRE(enumerate_transition_plans(1).size() == 20);
  REQUIRE(enumerate_transition_plans(2).size() == 80);
  REQUIRE(enumerate_transition_plans(3).size() == 320);
}

TEST_CASE("plan counts match a brute-force cartesian oracle") {
  for (int k = 0; k <= 3; ++k) {
    REQUIRE(enumerate_transition_plans(k).size() == brute_force_count(5, k));
  }
  auto three = std::vector<E>{E::kAngry, E::kHappy, E::kSad};
  for (int k = 0; k <= 4; ++k) {
    REQUIRE(enumerate_transition_plans(three, k).size() == brute_force_count(3, k));
  }
}

TEST_CASE("plans are lexicographic, valid and unique") {
  auto plans = enumerate_transition_plans(2);
  REQUIRE(plans.front().emotions == std::vector<E>{E::kAngry, E::kHappy, E::kAngry});
  REQUIRE(plans.back().emotions == std::vector<E>{E::kSurprised, E::kSad, E::kSurprised});

  std::set<std::vector<int>> seen;
  std::vector<int> prev;
  for (const auto& p : plans) {
    REQUIRE_NOTHROW(p.validate());
    REQUIRE(p.transition_count() == 2);
    std::vector<int> key;
    for (E e : p.emotions) key.push_back(static_cast<int>(e));
    REQUIRE(seen.insert(key).second);
    if (!prev.empty()) REQUIRE(prev < key);
    prev = key;
  }
}

TEST_CASE("plan enumeration rejects bad input") {
  REQUIRE_THROWS_AS(enumerate_transition_plans(-1), RangeError);
  REQUIRE_THROWS_AS(enumerate_transition_plans({E::kSad}, 1), RangeError);
  REQUIRE(enumerate_transition_plans({E::kSad}, 0).size() == 1);
}

TEST_CASE("topic hierarchy") {
  TopicHierarchy h = default_topic_hierarchy();
  REQUIRE_NOTHROW(h.validate());
  REQUIRE(h.primary.size() == 7);
  REQUIRE(h.total_secondary() >= 7);

  Rng rng(4);
  auto [p, s] = h.pick(rng);
  REQUIRE(std::find(h.primary.begin(), h.primary.end(), p) != h.primary.end());
  REQUIRE(std::find(h.secondary.at(p).begin(), h.secondary.at(p).end(), s) !=
          h.secondary.at(p).end());

  TopicHierarchy broken;
  broken.primary = {"Business"};
  REQUIRE_THROWS_AS(broken.validate(), ValidationError);
}

TEST_CASE("generation prompt carries the whole request") {
  GenerationRequest req;
  req.topic = {"Science", "a rover landing"};
  req.plan = TransitionPlan::of({E::kNeutral, E::kSurprised, E::kHappy});
  req.perspective = Perspective::kThird;
  req.language = Language::kEn;
  std::string prompt = build_generation_prompt(req);

  REQUIRE(prompt.find("Science / a rover landing") != std::string::npos);
  REQUIRE(prompt.find("exactly 3 sentence(s)") != std::string::npos);
  REQUIRE(prompt.find("Sentence 1 emotion: neutral") != std::string::npos);
  REQUIRE(prompt.find("Sentence 2 emotion: surprised") != std::string::npos);
  REQUIRE(prompt.find("Sentence 3 emotion: happy") != std::string::npos);
  REQUIRE(prompt.find("third-person") != std::string::npos);
  REQUIRE(build_generation_prompt(req) == prompt);

  req.language = Language::kZh;
  REQUIRE(build_generation_prompt(req).find("Chinese") != std::string::npos);
}

TEST_CASE("template textgen is deterministic and plan shaped") {
  GenerationRequest req;
  req.topic = {"Sports", "a marathon"};
  req.plan = TransitionPlan::of({E::kSad, E::kHappy, E::kSad});
  req.seed = 12345;

  TemplateTextGenClient client;
  auto a = generate_discourse(client, req);
  auto b = generate_discourse(client, req);
  REQUIRE(a == b);
  REQUIRE(a.size() == 3);
  for (const auto& s : a) {
    REQUIRE(s.find("a marathon") != std::string::npos);
  }

  req.language = Language::kZh;
  auto zh = generate_discourse(client, req);
  REQUIRE(zh.size() == 3);
  REQUIRE(zh != a);
}

namespace {

// Fails shape validation (wrong cardinality) for the first `bad` calls.
class FlakyTextGen : public TextGenClient {
 public:
  explicit FlakyTextGen(int bad) : bad_(bad) {}
  std::vector<std::string> generate(const std::string& prompt, Language language,
                                    std::uint64_t seed) override {
    ++calls_;
    if (calls_ <= bad_) return {"only one line"};
    return inner_.generate(prompt, language, seed);
  }
  int calls() const { return calls_; }

 private:
  TemplateTextGenClient inner_;
  int bad_ = 0;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("generate_discourse retries and then succeeds") {
  GenerationRequest req;
  req.topic = {"Culture", "a folk festival"};
  req.plan = TransitionPlan::of({E::kAngry, E::kNeutral});
  req.seed = 9;

  FlakyTextGen flaky(2);
  auto lines = generate_discourse(flaky, req, 3);
  REQUIRE(lines.size() == 2);
  REQUIRE(flaky.calls() == 3);
}

TEST_CASE("generate_discourse exhausts retries with attempt transcripts") {
  GenerationRequest req;
  req.topic = {"Culture", "a folk festival"};
  req.plan = TransitionPlan::of({E::kAngry, E::kNeutral});

  FlakyTextGen flaky(100);
  try {
    generate_discourse(flaky, req, 3);
    FAIL("expected ClientError");
  } catch (const ClientError& e) {
    REQUIRE(e.attempts().size() == 3);
    REQUIRE(flaky.calls() == 3);
  }
}
