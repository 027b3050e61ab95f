#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "emotrans/clients.hpp"
#include "emotrans/core.hpp"
#include "emotrans/error.hpp"
#include "emotrans/fallback_clients.hpp"
#include "emotrans/metrics.hpp"
#include "emotrans/rng.hpp"

using namespace emotrans;

namespace {

EvalPair pair_of(std::initializer_list<EmotionLabel> predicted,
                 std::initializer_list<EmotionLabel> truth) {
  EvalPair p;
  p.predicted_plan = TransitionPlan::of(predicted);
  p.true_plan = TransitionPlan::of(truth);
  p.k = p.true_plan.transition_count();
  return p;
}

// Returns the vectors it was loaded with, one per embed() call.
class ScriptedEmbedder final : public EmbedderClient {
 public:
  explicit ScriptedEmbedder(std::vector<EmbeddingVector> canned) : canned_(std::move(canned)) {}

  EmbeddingVector embed(const Waveform& audio) override {
    REQUIRE_FALSE(audio.samples.empty());
    REQUIRE(calls_ < canned_.size());
    return canned_[calls_++];
  }

  std::size_t calls() const { return calls_; }

 private:
  std::vector<EmbeddingVector> canned_;
  std::size_t calls_ = 0;
};

EmbeddingVector vec(std::initializer_list<float> values) {
  return EmbeddingVector{std::vector<float>(values)};
}

Waveform flat_audio(double duration_s, int sample_rate = 1000) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(static_cast<std::size_t>(std::lround(duration_s * sample_rate)), 0.1f);
  return w;
}

std::string joined(const std::vector<std::string>& texts) {
  std::string out;
  for (const std::string& t : texts) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// Independent re-statement of the detection sweep: recomputes every operating
// point from scratch at each threshold instead of incrementally.
struct BruteEer {
  double eer_percent = 0.0;
  double threshold = 0.0;
  double miss = 0.0;
  double fa = 0.0;
};

std::optional<BruteEer> brute_eer(const std::vector<double>& s, const std::vector<int>& tgt,
                                  int tol) {
  std::vector<long> truths;
  for (std::size_t t = 0; t < tgt.size(); ++t)
    if (tgt[t] == 1) truths.push_back(static_cast<long>(t));
  if (truths.empty()) return std::nullopt;

  std::vector<std::size_t> peaks;
  for (std::size_t t = 0; t < s.size(); ++t) {
    bool left = t == 0 || s[t] >= s[t - 1];
    bool right = t + 1 == s.size() || s[t] >= s[t + 1];
    if (left && right) peaks.push_back(t);
  }

  std::vector<double> levels{2.0};
  for (std::size_t p : peaks) levels.push_back(s[p]);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  const double n_true = static_cast<double>(truths.size());
  const double n_neg = static_cast<double>(
      std::max<long>(1, static_cast<long>(s.size()) - static_cast<long>(truths.size())));

  auto better = [](double diff_a, double mean_a, double th_a, double diff_b, double mean_b,
                   double th_b) {
    if (diff_a != diff_b) return diff_a < diff_b;
    if (mean_a != mean_b) return mean_a < mean_b;
    return th_a > th_b;
  };

  std::optional<BruteEer> best;
  double best_diff = 0.0;
  for (double th : levels) {
    long det = 0;
    long fp = 0;
    for (long b : truths) {
      bool hit = false;
      for (std::size_t p : peaks)
        if (s[p] >= th && std::labs(static_cast<long>(p) - b) <= tol) {
          hit = true;
          break;
        }
      if (hit) ++det;
    }
    for (std::size_t p : peaks) {
      if (s[p] < th) continue;
      bool near = false;
      for (long b : truths)
        if (std::labs(static_cast<long>(p) - b) <= tol) {
          near = true;
          break;
        }
      if (!near) ++fp;
    }
    double miss = (n_true - static_cast<double>(det)) / n_true;
    double fa = static_cast<double>(fp) / n_neg;
    double diff = std::abs(miss - fa);
    double mean = (miss + fa) / 2.0;
    if (!best || better(diff, mean, th, best_diff, (best->miss + best->fa) / 2.0,
                        best->threshold)) {
      best = BruteEer{100.0 * mean, th, miss, fa};
      best_diff = diff;
    }
  }
  return best;
}

UtteranceManifest stats_manifest(const std::string& id, Language lang,
                                 std::initializer_list<EmotionLabel> plan,
                                 const std::vector<std::string>& sentence_texts,
                                 double seconds_per_sentence, const std::string& speaker) {
  UtteranceManifest m;
  m.id = id;
  m.language = lang;
  m.speaker_id = speaker;
  m.plan = TransitionPlan::of(plan);
  double t = 0.0;
  std::size_t i = 0;
  for (const std::string& text : sentence_texts) {
    SentenceRecord s;
    s.text = text;
    s.emotion = m.plan.emotions[std::min(i, m.plan.emotions.size() - 1)];
    s.start_s = t;
    t += seconds_per_sentence;
    s.end_s = t;
    m.sentences.push_back(s);
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("acc_etc counts transition-count matches", "[metrics]") {
  std::vector<EvalPair> pairs;
  pairs.push_back(pair_of({EmotionLabel::kAngry, EmotionLabel::kSad},
                          {EmotionLabel::kHappy, EmotionLabel::kNeutral}));
  pairs.push_back(pair_of({EmotionLabel::kAngry}, {EmotionLabel::kSad}));
  CHECK(acc_etc(pairs) == 100.0);

  pairs.push_back(pair_of({EmotionLabel::kAngry},
                          {EmotionLabel::kHappy, EmotionLabel::kSad, EmotionLabel::kHappy}));
  CHECK(acc_etc(pairs) == Catch::Approx(200.0 / 3.0));

  auto by_k = acc_etc_by_k(pairs);
  REQUIRE(by_k.size() == 3);
  CHECK(by_k.at(0) == 100.0);
  CHECK(by_k.at(1) == 100.0);
  CHECK(by_k.at(2) == 0.0);

  CHECK_THROWS_AS(acc_etc({}), ValidationError);

  EvalPair bad = pairs[0];
  bad.k = 3;
  CHECK_THROWS_AS(acc_etc({bad}), ValidationError);
}

TEST_CASE("acc_etc is order independent", "[metrics]") {
  std::vector<EvalPair> pairs;
  pairs.push_back(pair_of({EmotionLabel::kAngry, EmotionLabel::kSad},
                          {EmotionLabel::kHappy, EmotionLabel::kNeutral}));
  pairs.push_back(pair_of({EmotionLabel::kNeutral},
                          {EmotionLabel::kHappy, EmotionLabel::kNeutral}));
  pairs.push_back(pair_of({EmotionLabel::kSad}, {EmotionLabel::kSurprised}));
  double a = acc_etc(pairs);
  std::reverse(pairs.begin(), pairs.end());
  CHECK(acc_etc(pairs) == a);
}

TEST_CASE("acc_ett conditions on a correct count", "[metrics]") {
  std::vector<EvalPair> pairs;
  // Count correct, sequence correct.
  pairs.push_back(pair_of({EmotionLabel::kAngry, EmotionLabel::kSad},
                          {EmotionLabel::kAngry, EmotionLabel::kSad}));
  // Count correct, sequence wrong (reversed order must not match).
  pairs.push_back(pair_of({EmotionLabel::kSad, EmotionLabel::kAngry},
                          {EmotionLabel::kAngry, EmotionLabel::kSad}));
  // Count wrong: excluded from the conditional denominator entirely.
  pairs.push_back(pair_of({EmotionLabel::kAngry},
                          {EmotionLabel::kHappy, EmotionLabel::kSad, EmotionLabel::kHappy}));

  auto conditional = acc_ett(pairs);
  REQUIRE(conditional.has_value());
  CHECK(*conditional == 50.0);

  CHECK(acc_exact_sequence(pairs) == Catch::Approx(100.0 / 3.0));

  // No count-correct pair -> not applicable rather than a number.
  std::vector<EvalPair> none = {pairs[2]};
  CHECK_FALSE(acc_ett(none).has_value());
  CHECK(acc_exact_sequence(none) == 0.0);
  CHECK_THROWS_AS(acc_exact_sequence({}), ValidationError);
}

TEST_CASE("cosine_similarity exact values and zero-norm rejection", "[metrics]") {
  CHECK(cosine_similarity(vec({3, 1, 0, 0}), vec({3, 0, 1, 0})) ==
        Catch::Approx(0.9).margin(1e-12));
  CHECK(cosine_similarity(vec({2, 1, 0, 0}), vec({2, 0, 1, 0})) ==
        Catch::Approx(0.8).margin(1e-12));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == 0.0);
  CHECK(cosine_similarity(vec({1, 2, 2}), vec({1, 2, 2})) == 1.0);
  CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), NumericError);
  CHECK_THROWS_AS(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), ValidationError);
}

TEST_CASE("ees multiplies per-segment cosines: 0.9 * 0.8", "[metrics]") {
  std::vector<std::string> texts = {"abcde", "fghij"};
  KnownTextAsrClient asr(joined(texts));
  // |u|^2 = |v|^2 = 10 with dot 9 gives cosine exactly 9/10; likewise 4/sqrt(25).
  ScriptedEmbedder embedder({vec({3, 1, 0, 0}), vec({2, 1, 0, 0})});
  std::vector<EmbeddingVector> truth = {vec({3, 0, 1, 0}), vec({2, 0, 1, 0})};

  Waveform audio = flat_audio(11.0);
  EesBreakdown b = ees_breakdown(audio, texts, asr, embedder, truth);
  REQUIRE(b.cosines.size() == 2);
  CHECK(b.cosines[0] == Catch::Approx(0.9).margin(1e-12));
  CHECK(b.cosines[1] == Catch::Approx(0.8).margin(1e-12));
  CHECK(b.score == Catch::Approx(0.72).margin(1e-9));
  CHECK(embedder.calls() == 2);

  // Boundary sits at the end of the 5th non-space character: 11 characters
  // spread over 11 s, so the space gap [5 s, 6 s) stays in the first slice.
  REQUIRE(b.boundaries_s.size() == 1);
  CHECK(b.boundaries_s[0] == Catch::Approx(5.0).margin(1e-9));
}

TEST_CASE("ees identity and annihilation", "[metrics]") {
  std::vector<std::string> texts = {"abc", "def", "ghi"};
  KnownTextAsrClient asr(joined(texts));

  SECTION("matching embeddings give exactly 1.0") {
    ScriptedEmbedder embedder({vec({1, 2, 2}), vec({0, 3, 4}), vec({2, 0, 0})});
    std::vector<EmbeddingVector> truth = {vec({1, 2, 2}), vec({0, 3, 4}), vec({2, 0, 0})};
    CHECK(ees(flat_audio(4.5), texts, asr, embedder, truth) == 1.0);
  }

  SECTION("one orthogonal segment zeroes the product") {
    ScriptedEmbedder embedder({vec({1, 2, 2}), vec({0, 3, 4}), vec({0, 1, 0})});
    std::vector<EmbeddingVector> truth = {vec({1, 2, 2}), vec({0, 3, 4}), vec({1, 0, 0})};
    CHECK(ees(flat_audio(4.5), texts, asr, embedder, truth) == 0.0);
  }
}

TEST_CASE("ees product equals an independent per-segment loop", "[metrics]") {
  Rng rng(0xE35'0001);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 1 + static_cast<int>(rng.uniform_index(4));
    std::vector<std::string> texts;
    for (int i = 0; i < n; ++i)
      texts.push_back(std::string(2 + rng.uniform_index(6), static_cast<char>('a' + i)));

    auto random_vec = [&rng]() {
      EmbeddingVector v;
      v.values.push_back(static_cast<float>(rng.uniform(0.2, 1.0)));
      for (int i = 0; i < 3; ++i)
        v.values.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
      return v;
    };
    std::vector<EmbeddingVector> synth_vecs;
    std::vector<EmbeddingVector> truth;
    for (int i = 0; i < n; ++i) {
      synth_vecs.push_back(random_vec());
      truth.push_back(random_vec());
    }

    KnownTextAsrClient asr(joined(texts));
    ScriptedEmbedder embedder(synth_vecs);
    EesBreakdown b =
        ees_breakdown(flat_audio(2.0 * n, 2000), texts, asr, embedder, truth);

    REQUIRE(b.cosines.size() == static_cast<std::size_t>(n));
    double loop = 1.0;
    for (int i = 0; i < n; ++i) {
      CHECK(b.cosines[i] == cosine_similarity(synth_vecs[i], truth[i]));
      loop *= b.cosines[i];
    }
    CHECK(b.score == loop);
  }
}

TEST_CASE("ees rejects a transcript shorter than the reference", "[metrics]") {
  std::vector<std::string> texts = {"abcd", "ef"};
  ScriptedEmbedder embedder({vec({1, 0}), vec({1, 0})});
  std::vector<EmbeddingVector> truth = {vec({1, 0}), vec({1, 0})};

  KnownTextAsrClient short_asr("abcde");
  CHECK_THROWS_AS(ees(flat_audio(3.0), texts, short_asr, embedder, truth), ConsistencyError);

  KnownTextAsrClient one_short("abcd e");
  CHECK_THROWS_AS(ees(flat_audio(3.0), texts, one_short, embedder, truth), ConsistencyError);

  KnownTextAsrClient exact_asr("abcd ef");
  CHECK_NOTHROW(ees(flat_audio(3.0), texts, exact_asr, embedder, truth));
}

TEST_CASE("ees input validation", "[metrics]") {
  KnownTextAsrClient asr("abc");
  ScriptedEmbedder embedder({vec({1, 0})});
  std::vector<EmbeddingVector> truth = {vec({1, 0})};

  CHECK_THROWS_AS(ees(flat_audio(1.0), {}, asr, embedder, truth), ValidationError);
  CHECK_THROWS_AS(ees(flat_audio(1.0), {"abc", "def"}, asr, embedder, truth), ValidationError);
  CHECK_THROWS_AS(ees(flat_audio(1.0), {"   "}, asr, embedder, truth), ValidationError);
}

TEST_CASE("ees ignores spacing when counting characters", "[metrics]") {
  // Same characters, different spacing in the reference segments.
  std::vector<std::string> spaced = {"ab cde", "fg hij"};
  std::vector<std::string> tight = {"abcde", "fghij"};
  std::vector<EmbeddingVector> truth = {vec({1, 1}), vec({1, 1})};

  KnownTextAsrClient asr("abcde fghij");
  ScriptedEmbedder e1({vec({2, 0}), vec({0, 2})});
  ScriptedEmbedder e2({vec({2, 0}), vec({0, 2})});
  EesBreakdown a = ees_breakdown(flat_audio(11.0), spaced, asr, e1, truth);
  EesBreakdown b = ees_breakdown(flat_audio(11.0), tight, asr, e2, truth);
  REQUIRE(a.boundaries_s.size() == 1);
  CHECK(a.boundaries_s[0] == b.boundaries_s[0]);
  CHECK(a.score == b.score);
}

TEST_CASE("ees_mean_percent", "[metrics]") {
  CHECK(ees_mean_percent({0.72, 0.8}) == Catch::Approx(76.0));
  CHECK(ees_mean_percent({1.0}) == 100.0);
  CHECK_THROWS_AS(ees_mean_percent({}), ValidationError);
}

TEST_CASE("fea frame accuracy", "[metrics]") {
  CHECK(fea({0, 1, 2, 3}, {0, 1, 2, 3}) == 100.0);
  CHECK(fea({0, 1, 2, 3}, {0, 1, 4, 4}) == 50.0);
  CHECK(fea({2, 2}, {0, 1}) == 0.0);
  CHECK_THROWS_AS(fea({0, 1}, {0}), ValidationError);
  CHECK_THROWS_AS(fea({}, {}), ValidationError);

  // Accuracy depends only on positions of agreement, not label values.
  std::vector<int> a = {0, 1, 1, 2, 4};
  std::vector<int> b = {0, 1, 3, 2, 0};
  std::vector<int> a2 = {7, 8, 8, 9, 11};
  std::vector<int> b2 = {7, 8, 10, 9, 7};
  CHECK(fea(a, b) == fea(a2, b2));
}

TEST_CASE("eer is zero for clean peaks on the boundaries", "[metrics]") {
  std::vector<double> scores(100, 0.0);
  std::vector<int> targets(100, 0);
  scores[20] = 1.0;
  scores[60] = 1.0;
  targets[20] = 1;
  targets[60] = 1;

  auto point = eer(scores, targets);
  REQUIRE(point.has_value());
  CHECK(point->eer_percent == 0.0);
  CHECK(point->threshold == 1.0);
  CHECK(point->miss_rate == 0.0);
  CHECK(point->false_alarm_rate == 0.0);
}

TEST_CASE("eer hand-checked crossing point", "[metrics]") {
  // Peaks at frames 1 (0.9, spurious) and 4 (0.8, one frame from nothing:
  // the true boundary is frame 4 itself). Admitting the 0.8 peak trades one
  // false alarm for the only hit, which is the closest miss/FA crossing.
  std::vector<double> scores = {0.1, 0.9, 0.1, 0.1, 0.8};
  std::vector<int> targets = {0, 0, 0, 0, 1};
  auto point = eer(scores, targets, 1);
  REQUIRE(point.has_value());
  CHECK(point->threshold == 0.8);
  CHECK(point->miss_rate == 0.0);
  CHECK(point->false_alarm_rate == 0.25);
  CHECK(point->eer_percent == 12.5);
}

TEST_CASE("eer not applicable without true boundaries", "[metrics]") {
  std::vector<double> scores = {0.1, 0.9, 0.1};
  std::vector<int> targets = {0, 0, 0};
  CHECK_FALSE(eer(scores, targets).has_value());
}

TEST_CASE("eer input validation", "[metrics]") {
  CHECK_THROWS_AS(eer({0.5}, {1, 0}), ValidationError);
  CHECK_THROWS_AS(eer({}, {}), ValidationError);
  CHECK_THROWS_AS(eer({1.5}, {1}), RangeError);
  CHECK_THROWS_AS(eer({-0.1}, {1}), RangeError);
  CHECK_THROWS_AS(eer({0.5}, {2}), ValidationError);
  CHECK_THROWS_AS(eer({0.5}, {1}, -1), RangeError);
}

TEST_CASE("eer sweep matches a brute-force oracle", "[metrics]") {
  Rng rng(0xEE'7001);
  int applicable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t frames = 20 + rng.uniform_index(181);
    int tol = static_cast<int>(rng.uniform_index(7));

    std::vector<int> targets(frames, 0);
    for (std::size_t t = 0; t < frames; ++t)
      if (rng.bernoulli(0.06)) targets[t] = 1;
    if (std::find(targets.begin(), targets.end(), 1) == targets.end())
      targets[rng.uniform_index(frames)] = 1;

    std::vector<double> scores(frames, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      double u = rng.uniform();
      // Quantize two thirds of the instances so plateaus and exact score
      // ties exercise the grouped sweep.
      scores[t] = trial % 3 == 0 ? u : std::floor(u * 8.0) / 8.0;
    }
    if (trial % 2 == 0) {
      for (std::size_t t = 0; t < frames; ++t)
        if (targets[t] == 1) scores[t] = std::min(1.0, scores[t] + 0.5);
    }

    auto fast = eer(scores, targets, tol);
    auto brute = brute_eer(scores, targets, tol);
    REQUIRE(fast.has_value() == brute.has_value());
    if (!fast) continue;
    ++applicable;
    CHECK(fast->eer_percent == brute->eer_percent);
    CHECK(fast->threshold == brute->threshold);
    CHECK(fast->miss_rate == brute->miss);
    CHECK(fast->false_alarm_rate == brute->fa);
  }
  CHECK(applicable == 100);
}

TEST_CASE("dataset_stats aggregates one cell", "[metrics]") {
  std::vector<UtteranceManifest> ms;
  ms.push_back(stats_manifest("u1", Language::kEn, {EmotionLabel::kNeutral},
                              {"one two three four"}, 5.0, "spk-a"));
  ms.push_back(stats_manifest("u2", Language::kEn, {EmotionLabel::kNeutral},
                              {"alpha beta", "gamma delta epsilon"}, 3.5, "spk-b"));

  CaptionRecord caps;
  caps.v_i = "A calm voice speaks.";
  caps.v_d = "Steady and even throughout the take.";
  caps.encoded_plan = TransitionPlan::of({EmotionLabel::kNeutral});
  ms[0].captions = caps;

  auto rows = dataset_stats(ms);
  REQUIRE(rows.size() == 1);
  const StatsRow& r = rows[0];
  CHECK(r.language == Language::kEn);
  CHECK(r.transitions == 0);
  CHECK(r.utterances == 2);
  CHECK(r.total_words == 9);
  CHECK(r.min_words == 4);
  CHECK(r.max_words == 5);
  CHECK(r.mean_words == 4.5);
  CHECK(r.total_duration_s == Catch::Approx(12.0));
  CHECK(r.min_duration_s == 5.0);
  CHECK(r.max_duration_s == 7.0);
  CHECK(r.mean_duration_s == Catch::Approx(6.0));
  CHECK(r.vi.counted == 1);
  CHECK(r.vi.min_words == 4);
  CHECK(r.vi.max_words == 4);
  CHECK(r.vi.mean_words == 4.0);
  CHECK(r.vd.counted == 1);
  CHECK(r.vd.min_words == 6);
  CHECK(r.distinct_plans == 1);
  CHECK(r.distinct_speakers == 2);
}

TEST_CASE("dataset_stats splits cells and counts zh characters", "[metrics]") {
  std::vector<UtteranceManifest> ms;
  ms.push_back(stats_manifest("en0", Language::kEn, {EmotionLabel::kHappy},
                              {"just one sentence"}, 4.0, "spk-a"));
  ms.push_back(stats_manifest("zh1", Language::kZh,
                              {EmotionLabel::kHappy, EmotionLabel::kSad},
                              {"你好吗", "再见了朋友"}, 2.0, "spk-b"));
  ms.push_back(stats_manifest("zh1b", Language::kZh,
                              {EmotionLabel::kAngry, EmotionLabel::kSad},
                              {"我很生气", "难过"}, 3.0, "spk-b"));

  auto rows = dataset_stats(ms);
  REQUIRE(rows.size() == 2);

  CHECK(rows[0].transitions == 0);
  CHECK(rows[0].language == Language::kEn);
  CHECK(rows[0].utterances == 1);
  CHECK(rows[0].min_words == 3);
  CHECK(rows[0].max_words == 3);
  CHECK(rows[0].mean_words == 3.0);
  CHECK(rows[0].min_duration_s == rows[0].max_duration_s);
  CHECK(rows[0].vi.counted == 0);
  CHECK(rows[0].vd.counted == 0);

  CHECK(rows[1].transitions == 1);
  CHECK(rows[1].language == Language::kZh);
  CHECK(rows[1].utterances == 2);
  // CJK text counts characters, not whitespace tokens.
  CHECK(rows[1].total_words == 8 + 6);
  CHECK(rows[1].min_words == 6);
  CHECK(rows[1].max_words == 8);
  CHECK(rows[1].distinct_plans == 2);
  CHECK(rows[1].distinct_speakers == 1);

  CHECK_THROWS_AS(dataset_stats({}), ValidationError);
}

TEST_CASE("dataset_stats rows are ordered by transitions then language", "[metrics]") {
  std::vector<UtteranceManifest> ms;
  ms.push_back(stats_manifest("a", Language::kZh, {EmotionLabel::kHappy, EmotionLabel::kSad},
                              {"你好", "再见"}, 2.0, "s"));
  ms.push_back(stats_manifest("b", Language::kEn, {EmotionLabel::kHappy}, {"hi there"}, 2.0,
                              "s"));
  ms.push_back(stats_manifest("c", Language::kEn, {EmotionLabel::kHappy, EmotionLabel::kSad},
                              {"hi there", "bye now"}, 2.0, "s"));

  auto rows = dataset_stats(ms);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].transitions == 0);
  CHECK(rows[0].language == Language::kEn);
  CHECK(rows[1].transitions == 1);
  CHECK(rows[1].language == Language::kEn);
  CHECK(rows[2].transitions == 1);
  CHECK(rows[2].language == Language::kZh);
}
