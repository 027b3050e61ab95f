#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "emotrans/clients.hpp"
#include "emotrans/core.hpp"
#include "emotrans/error.hpp"
#include "emotrans/text.hpp"

namespace emotrans {

// =============================================================================
// Transition count / type accuracy
// =============================================================================

struct EvalPair {
  TransitionPlan predicted_plan;
  TransitionPlan true_plan;
  int k = 0;

  void validate() const {
    if (k != true_plan.transition_count())
      throw ValidationError("eval pair: k does not match the true plan");
  }
};

// Share of pairs whose predicted transition count equals the true count, x100.
inline double acc_etc(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw ValidationError("acc_etc: empty group");
  int correct = 0;
  for (const EvalPair& p : pairs) {
    p.validate();
    if (p.predicted_plan.transition_count() == p.k) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pairs.size());
}

inline std::map<int, double> acc_etc_by_k(const std::vector<EvalPair>& pairs) {
  std::map<int, std::vector<EvalPair>> groups;
  for (const EvalPair& p : pairs) groups[p.k].push_back(p);
  std::map<int, double> out;
  for (auto& [k, group] : groups) out[k] = acc_etc(group);
  return out;
}

// Conditional on a correct count: share of count-correct pairs whose ordered
// emotion sequence matches exactly, x100. No count-correct pairs -> nullopt.
inline std::optional<double> acc_ett(const std::vector<EvalPair>& pairs) {
  int eligible = 0;
  int correct = 0;
  for (const EvalPair& p : pairs) {
    p.validate();
    if (p.predicted_plan.transition_count() != p.k) continue;
    ++eligible;
    if (p.predicted_plan == p.true_plan) ++correct;
  }
  if (eligible == 0) return std::nullopt;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(eligible);
}

// Unconditional exact-sequence accuracy, reported as a supplementary number.
inline double acc_exact_sequence(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw ValidationError("acc_exact_sequence: empty group");
  int correct = 0;
  for (const EvalPair& p : pairs)
    if (p.predicted_plan == p.true_plan) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// =============================================================================
// Emotional equivalence score (EES)
// =============================================================================

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  double na = a.norm();
  double nb = b.norm();
  if (na <= 0.0 || nb <= 0.0) throw NumericError("cosine: zero-norm embedding");
  return a.dot(b) / (na * nb);
}

struct EesBreakdown {
  std::vector<double> boundaries_s;  // inner segment boundaries from ASR timings
  std::vector<double> cosines;       // one per segment, in order
  double score = 1.0;                // product of the cosines
};

// ASR char timings -> cumulative-character boundary estimation -> per-segment
// embeddings -> product of cosine similarities against the truth embeddings.
// Characters are counted per UTF-8 code point with whitespace ignored, so CJK
// text is counted per character and en word spacing does not shift boundaries.
inline EesBreakdown ees_breakdown(const Waveform& synth,
                                  const std::vector<std::string>& segment_texts,
                                  AsrClient& asr, EmbedderClient& embedder,
                                  const std::vector<EmbeddingVector>& truth_embeddings) {
  if (segment_texts.empty()) throw ValidationError("ees: no segments");
  if (segment_texts.size() != truth_embeddings.size())
    throw ValidationError("ees: need one truth embedding per segment");
  synth.validate();

  std::vector<std::size_t> cum;
  std::size_t acc = 0;
  for (const std::string& text : segment_texts) {
    std::size_t units = 0;
    for (const std::string& ch : split_utf8_chars(text))
      if (!is_space_char(ch)) ++units;
    if (units == 0) throw ValidationError("ees: segment text has no characters");
    acc += units;
    cum.push_back(acc);
  }

  AsrTranscript transcript = asr.transcribe(synth);
  EesBreakdown out;
  std::size_t seen = 0;
  std::size_t next_boundary = 0;
  for (const CharTiming& ct : transcript.char_timings) {
    if (is_space_char(ct.character)) continue;
    ++seen;
    if (next_boundary + 1 < cum.size() && seen == cum[next_boundary]) {
      out.boundaries_s.push_back(ct.end_s);
      ++next_boundary;
    }
  }
  if (seen < cum.back())
    throw ConsistencyError("ees: ASR transcript has fewer characters than the reference");

  const double dur = synth.duration_s();
  std::vector<double> edges;
  edges.push_back(0.0);
  for (double b : out.boundaries_s) edges.push_back(b);
  edges.push_back(dur);

  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i + 1] > edges[i]))
      throw ConsistencyError("ees: degenerate segment slice from ASR timings");
    auto lo = static_cast<std::size_t>(std::lround(edges[i] * synth.sample_rate));
    auto hi = static_cast<std::size_t>(std::lround(edges[i + 1] * synth.sample_rate));
    hi = std::min(hi, synth.samples.size());
    lo = std::min(lo, hi);
    if (hi == lo) throw ConsistencyError("ees: empty audio slice");
    Waveform seg;
    seg.sample_rate = synth.sample_rate;
    seg.samples.assign(synth.samples.begin() + static_cast<long>(lo),
                       synth.samples.begin() + static_cast<long>(hi));
    EmbeddingVector e = embedder.embed(seg);
    out.cosines.push_back(cosine_similarity(e, truth_embeddings[i]));
  }

  out.score = 1.0;
  for (double c : out.cosines) out.score *= c;
  return out;
}

inline double ees(const Waveform& synth, const std::vector<std::string>& segment_texts,
                  AsrClient& asr, EmbedderClient& embedder,
                  const std::vector<EmbeddingVector>& truth_embeddings) {
  return ees_breakdown(synth, segment_texts, asr, embedder, truth_embeddings).score;
}

// Mean over the discourses of one transition bucket, x100 (table scale).
inline double ees_mean_percent(const std::vector<double>& scores) {
  if (scores.empty()) throw ValidationError("ees_mean_percent: empty score set");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return 100.0 * sum / static_cast<double>(scores.size());
}

// =============================================================================
// Frame emotion accuracy (FEA)
// =============================================================================

inline double fea(const std::vector<int>& predicted, const std::vector<int>& target) {
  if (predicted.size() != target.size()) throw ValidationError("fea: length mismatch");
  if (predicted.empty()) throw ValidationError("fea: empty sequences");
  std::size_t match = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == target[i]) ++match;
  return 100.0 * static_cast<double>(match) / static_cast<double>(predicted.size());
}

// =============================================================================
// Boundary-detection equal error rate (EER)
// =============================================================================

struct EerPoint {
  double eer_percent = 0.0;      // (miss + false alarm) / 2 at the crossing, x100
  double threshold = 0.0;        // 2.0 marks the empty detection set
  double miss_rate = 0.0;
  double false_alarm_rate = 0.0;
};

namespace detail {

// Local maxima with plateau frames included; the candidate detections.
inline std::vector<std::size_t> score_peaks(const std::vector<double>& scores) {
  std::vector<std::size_t> peaks;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    bool left = t == 0 || scores[t] >= scores[t - 1];
    bool right = t + 1 == scores.size() || scores[t] >= scores[t + 1];
    if (left && right) peaks.push_back(t);
  }
  return peaks;
}

inline bool eer_candidate_better(double diff_a, double mean_a, double th_a, double diff_b,
                                 double mean_b, double th_b) {
  if (diff_a != diff_b) return diff_a < diff_b;
  if (mean_a != mean_b) return mean_a < mean_b;
  return th_a > th_b;
}

}  // namespace detail

// Sweeps the detection threshold over every distinct peak score (plus the
// empty set at threshold 2.0) and returns the operating point where the miss
// rate crosses the false-alarm rate: minimal |miss - FA|, ties broken toward
// the smaller mean and then the higher threshold. A peak counts as a hit when
// a true boundary lies within tolerance_frames of it; every true boundary
// within that window counts as detected.
inline std::optional<EerPoint> eer(const std::vector<double>& scores,
                                   const std::vector<int>& boundary_targets,
                                   int tolerance_frames = 5) {
  if (scores.size() != boundary_targets.size())
    throw ValidationError("eer: scores and targets differ in length");
  if (scores.empty()) throw ValidationError("eer: empty input");
  if (tolerance_frames < 0) throw RangeError("eer: tolerance_frames must be >= 0");
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0)) throw RangeError("eer: scores must lie in [0, 1]");

  std::vector<long> truths;
  for (std::size_t t = 0; t < boundary_targets.size(); ++t) {
    if (boundary_targets[t] != 0 && boundary_targets[t] != 1)
      throw ValidationError("eer: boundary targets must be 0 or 1");
    if (boundary_targets[t] == 1) truths.push_back(static_cast<long>(t));
  }
  if (truths.empty()) return std::nullopt;

  const double n_true = static_cast<double>(truths.size());
  const double n_neg = static_cast<double>(
      std::max<long>(1, static_cast<long>(scores.size()) - static_cast<long>(truths.size())));

  std::vector<std::size_t> peaks = detail::score_peaks(scores);
  std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  // Empty detection set first, then grow it one score level at a time.
  EerPoint best{50.0 * (1.0 + 0.0), 2.0, 1.0, 0.0};
  best.eer_percent = 100.0 * (best.miss_rate + best.false_alarm_rate) / 2.0;
  double best_diff = std::abs(best.miss_rate - best.false_alarm_rate);

  std::vector<char> detected(truths.size(), 0);
  long detected_count = 0;
  long false_positives = 0;
  std::size_t i = 0;
  while (i < peaks.size()) {
    const double level = scores[peaks[i]];
    for (; i < peaks.size() && scores[peaks[i]] == level; ++i) {
      const long frame = static_cast<long>(peaks[i]);
      auto lo = std::lower_bound(truths.begin(), truths.end(), frame - tolerance_frames);
      auto hi = std::upper_bound(truths.begin(), truths.end(), frame + tolerance_frames);
      if (lo == hi) {
        ++false_positives;
        continue;
      }
      for (auto it = lo; it != hi; ++it) {
        std::size_t idx = static_cast<std::size_t>(it - truths.begin());
        if (!detected[idx]) {
          detected[idx] = 1;
          ++detected_count;
        }
      }
    }
    double miss = (n_true - static_cast<double>(detected_count)) / n_true;
    double fa = static_cast<double>(false_positives) / n_neg;
    double diff = std::abs(miss - fa);
    double mean = (miss + fa) / 2.0;
    if (detail::eer_candidate_better(diff, mean, level, best_diff,
                                     (best.miss_rate + best.false_alarm_rate) / 2.0,
                                     best.threshold)) {
      best = EerPoint{100.0 * mean, level, miss, fa};
      best_diff = diff;
    }
  }
  return best;
}

// =============================================================================
// Dataset statistics (per language x transition-count cell)
// =============================================================================

struct CaptionLengthStats {
  int counted = 0;  // manifests contributing; 0 marks the row absent
  long min_words = 0;
  long max_words = 0;
  double mean_words = 0.0;
};

struct StatsRow {
  Language language = Language::kEn;
  int transitions = 0;
  int utterances = 0;
  long total_words = 0;
  long min_words = 0;
  long max_words = 0;
  double mean_words = 0.0;
  double total_duration_s = 0.0;
  double min_duration_s = 0.0;
  double max_duration_s = 0.0;
  double mean_duration_s = 0.0;
  CaptionLengthStats vi;
  CaptionLengthStats vd;
  int distinct_plans = 0;
  int distinct_speakers = 0;
};

inline std::vector<StatsRow> dataset_stats(const std::vector<UtteranceManifest>& manifests) {
  if (manifests.empty()) throw ValidationError("dataset_stats: no manifests");

  struct Cell {
    std::vector<long> words;
    std::vector<double> durations;
    std::vector<long> vi_lengths;
    std::vector<long> vd_lengths;
    std::set<std::vector<EmotionLabel>> plans;
    std::set<std::string> speakers;
  };
  std::map<std::pair<int, int>, Cell> cells;  // (k, language index)

  for (const UtteranceManifest& m : manifests) {
    Cell& cell = cells[{m.plan.transition_count(), static_cast<int>(m.language)}];
    long words = 0;
    for (const SentenceRecord& s : m.sentences)
      words += static_cast<long>(count_units(s.text, m.language == Language::kZh));
    cell.words.push_back(words);
    cell.durations.push_back(m.duration_s());
    cell.plans.insert(m.plan.emotions);
    cell.speakers.insert(m.speaker_id);
    if (m.captions.has_value()) {
      if (!m.captions->v_i.empty())
        cell.vi_lengths.push_back(static_cast<long>(count_words(m.captions->v_i)));
      if (!m.captions->v_d.empty())
        cell.vd_lengths.push_back(static_cast<long>(count_words(m.captions->v_d)));
    }
  }

  auto fill_caption = [](const std::vector<long>& lengths) {
    CaptionLengthStats st;
    st.counted = static_cast<int>(lengths.size());
    if (lengths.empty()) return st;
    st.min_words = *std::min_element(lengths.begin(), lengths.end());
    st.max_words = *std::max_element(lengths.begin(), lengths.end());
    long sum = 0;
    for (long v : lengths) sum += v;
    st.mean_words = static_cast<double>(sum) / static_cast<double>(lengths.size());
    return st;
  };

  std::vector<StatsRow> rows;
  for (const auto& [key, cell] : cells) {
    StatsRow row;
    row.transitions = key.first;
    row.language = static_cast<Language>(key.second);
    row.utterances = static_cast<int>(cell.words.size());
    for (long w : cell.words) row.total_words += w;
    row.min_words = *std::min_element(cell.words.begin(), cell.words.end());
    row.max_words = *std::max_element(cell.words.begin(), cell.words.end());
    row.mean_words =
        static_cast<double>(row.total_words) / static_cast<double>(cell.words.size());
    for (double d : cell.durations) row.total_duration_s += d;
    row.min_duration_s = *std::min_element(cell.durations.begin(), cell.durations.end());
    row.max_duration_s = *std::max_element(cell.durations.begin(), cell.durations.end());
    row.mean_duration_s = row.total_duration_s / static_cast<double>(cell.durations.size());
    row.vi = fill_caption(cell.vi_lengths);
    row.vd = fill_caption(cell.vd_lengths);
    row.distinct_plans = static_cast<int>(cell.plans.size());
    row.distinct_speakers = static_cast<int>(cell.speakers.size());
    rows.push_back(row);
  }
  // map iteration already sorts by (k, language)
  return rows;
}

}  // namespace emotrans
