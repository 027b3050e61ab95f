#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "emotrans/core.hpp"
#include "emotrans/error.hpp"
#include "emotrans/features.hpp"
#include "emotrans/nn.hpp"
#include "emotrans/rng.hpp"
#include "emotrans/version.hpp"

namespace emotrans {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// Architecture parameters. Defaults follow the published configuration; the
// recurrent width is an artifact choice sized so its bidirectional output
// matches the heads' in_features.
struct ModelConfig {
  int res_blocks = 8;
  int in_planes = 768;
  int planes = 512;
  int embed_dim = 128;
  int kernel = 1;
  int stride = 1;
  int tf_layers = 2;
  int heads = 4;
  int d_model = 128;
  int ff_dim = 1024;
  double dropout = 0.5;
  int lstm_hidden = 64;  // per direction
  int head_hidden = 256;
  int dia_out = kEmotionCount;
  int det_out = 1;

  void validate() const {
    if (kernel != 1 || stride != 1)
      throw ValidationError("model config: only kernel=1, stride=1 is supported");
    if (embed_dim != d_model)
      throw ValidationError("model config: embed_dim must equal d_model");
    if (2 * lstm_hidden != d_model)
      throw ValidationError("model config: bidirectional output must equal d_model");
    if (dia_out != kEmotionCount)
      throw ValidationError("model config: dia_out must equal the emotion count");
    if (det_out != 1) throw ValidationError("model config: det_out must be 1");
    if (res_blocks < 0 || tf_layers < 0)
      throw ValidationError("model config: negative depth");
    if (in_planes < 1 || planes < 1 || embed_dim < 1 || ff_dim < 1 ||
        head_hidden < 1 || heads < 1)
      throw ValidationError("model config: non-positive width");
    if (d_model % heads != 0)
      throw ValidationError("model config: heads must divide d_model");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ValidationError("model config: dropout must be in [0, 1)");
  }

  // Slim variant for CPU-budget training runs and tests.
  static ModelConfig reduced() {
    ModelConfig c;
    c.res_blocks = 2;
    c.planes = 256;
    c.dropout = 0.1;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Frame targets
// ---------------------------------------------------------------------------

struct FrameTargets {
  std::vector<int> dia;  // emotion class per frame
  std::vector<int> det;  // 1 on dilated boundary frames
};

inline constexpr int kBoundaryDilationFrames = 2;

// dia[t] is the class of the segment containing the frame center
// (t + 0.5) / frame_rate; det marks each internal boundary frame
// floor(b * frame_rate), dilated by +-dilation_frames.
inline FrameTargets make_frame_targets(const std::vector<TimedSegment>& segments,
                                       double frame_rate, long t_frames,
                                       int dilation_frames = kBoundaryDilationFrames) {
  if (segments.empty()) throw ValidationError("frame targets: no segments");
  if (t_frames < 1) throw RangeError("frame targets: T must be >= 1");
  if (!(frame_rate > 0)) throw RangeError("frame targets: frame_rate must be > 0");
  if (dilation_frames < 0) throw RangeError("frame targets: negative dilation");

  const double slack = 1.0 / frame_rate;
  const double total = static_cast<double>(t_frames) / frame_rate;
  if (std::abs(segments.front().start_s) > slack)
    throw ValidationError("frame targets: segments must start at 0");
  for (std::size_t i = 1; i < segments.size(); ++i) {
    if (std::abs(segments[i].start_s - segments[i - 1].end_s) > slack)
      throw ValidationError("frame targets: gap or overlap at segment " +
                            std::to_string(i));
  }
  if (std::abs(segments.back().end_s - total) > slack)
    throw ValidationError("frame targets: segments do not cover the feature span");

  FrameTargets out;
  out.dia.resize(static_cast<std::size_t>(t_frames));
  out.det.assign(static_cast<std::size_t>(t_frames), 0);
  std::size_t seg = 0;
  for (long t = 0; t < t_frames; ++t) {
    double center = (static_cast<double>(t) + 0.5) / frame_rate;
    while (seg + 1 < segments.size() && center >= segments[seg].end_s) ++seg;
    out.dia[static_cast<std::size_t>(t)] = static_cast<int>(segments[seg].emotion);
  }
  for (std::size_t i = 1; i < segments.size(); ++i) {
    // Guard the floor against boundary times that sit an ulp below a frame.
    long bf = static_cast<long>(std::floor(segments[i].start_s * frame_rate + 1e-9));
    for (long t = bf - dilation_frames; t <= bf + dilation_frames; ++t) {
      if (t >= 0 && t < t_frames) out.det[static_cast<std::size_t>(t)] = 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uncertainty-weighted multi-task loss
// ---------------------------------------------------------------------------

// Log-variance parameterization: s = log(sigma^2). The total objective is
//   L/(2 sigma^2) + log(sigma)  per task,
// which in s-form is L*exp(-s)/2 + s/2.
struct UncertaintyState {
  double s_dia = 0.0;
  double s_det = 0.0;
};

inline double uncertainty_loss(double l_dia, double l_det, const UncertaintyState& st) {
  if (!std::isfinite(l_dia) || !std::isfinite(l_det) || !std::isfinite(st.s_dia) ||
      !std::isfinite(st.s_det))
    throw NumericError("uncertainty_loss: non-finite input");
  if (l_dia < 0.0 || l_det < 0.0)
    throw RangeError("uncertainty_loss: task losses must be >= 0");
  return l_dia * std::exp(-st.s_dia) / 2.0 + st.s_dia / 2.0 +
         l_det * std::exp(-st.s_det) / 2.0 + st.s_det / 2.0;
}

struct UncertaintyGrads {
  double d_l_dia = 0.0;  // d total / d L_dia
  double d_l_det = 0.0;
  double d_s_dia = 0.0;  // d total / d s_dia
  double d_s_det = 0.0;
};

inline UncertaintyGrads uncertainty_grads(double l_dia, double l_det,
                                          const UncertaintyState& st) {
  UncertaintyGrads g;
  g.d_l_dia = std::exp(-st.s_dia) / 2.0;
  g.d_l_det = std::exp(-st.s_det) / 2.0;
  g.d_s_dia = -l_dia * std::exp(-st.s_dia) / 2.0 + 0.5;
  g.d_s_det = -l_det * std::exp(-st.s_det) / 2.0 + 0.5;
  return g;
}

// ---------------------------------------------------------------------------
// Per-frame task losses
// ---------------------------------------------------------------------------

template <typename S>
struct TaskLoss {
  double value = 0.0;
  nn::Mat<S> dlogits;  // gradient of the mean loss w.r.t. logits
};

// Mean softmax cross-entropy over frames.
template <typename S>
TaskLoss<S> dia_cross_entropy(const nn::Mat<S>& logits, const std::vector<int>& targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw ValidationError("dia loss: frame count mismatch");
  const auto t_len = logits.rows();
  TaskLoss<S> out;
  out.dlogits.resize(logits.rows(), logits.cols());
  double acc = 0.0;
  for (Eigen::Index r = 0; r < t_len; ++r) {
    S m = logits.row(r).maxCoeff();
    nn::Row<S> shifted = (logits.row(r).array() - m).matrix();
    nn::Row<S> e = shifted.array().exp().matrix();
    S z = e.sum();
    int y = targets[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols()) throw RangeError("dia loss: label out of range");
    acc += -static_cast<double>(shifted(y)) + std::log(static_cast<double>(z));
    out.dlogits.row(r) = e / z;
    out.dlogits(r, y) -= S(1);
  }
  out.dlogits /= static_cast<S>(t_len);
  out.value = acc / static_cast<double>(t_len);
  return out;
}

inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// Mean binary cross-entropy with positive-class weighting.
template <typename S>
TaskLoss<S> det_binary_cross_entropy(const nn::Mat<S>& logits,
                                     const std::vector<int>& targets,
                                     double pos_weight) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw ValidationError("det loss: frame count mismatch");
  if (logits.cols() != 1) throw ValidationError("det loss: logits must be T x 1");
  if (!(pos_weight > 0)) throw RangeError("det loss: pos_weight must be > 0");
  const auto t_len = logits.rows();
  TaskLoss<S> out;
  out.dlogits.resize(t_len, 1);
  double acc = 0.0;
  for (Eigen::Index r = 0; r < t_len; ++r) {
    double z = static_cast<double>(logits(r, 0));
    double sig = 1.0 / (1.0 + std::exp(-z));
    if (targets[static_cast<std::size_t>(r)] != 0) {
      acc += pos_weight * softplus(-z);
      out.dlogits(r, 0) = static_cast<S>(pos_weight * (sig - 1.0));
    } else {
      acc += softplus(z);
      out.dlogits(r, 0) = static_cast<S>(sig);
    }
  }
  out.dlogits /= static_cast<S>(t_len);
  out.value = acc / static_cast<double>(t_len);
  return out;
}

// negatives/positives, capped; weight 1 when a sample has no positives.
inline double det_pos_weight(const std::vector<int>& det_targets, double cap = 100.0) {
  double pos = 0.0;
  for (int v : det_targets) pos += v != 0 ? 1.0 : 0.0;
  if (pos == 0.0) return 1.0;
  double neg = static_cast<double>(det_targets.size()) - pos;
  return std::min(cap, std::max(1.0, neg / pos));
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

// Pointwise residual block (kernel-1 convolutions are per-frame linear maps).
template <typename S>
struct ResBlock {
  nn::Linear<S> l1, l2;

  struct Cache {
    nn::Mat<S> x, pre1, act1, sum;
  };

  void init(int width, Rng& rng) {
    l1.init(width, width, rng);
    l2.init(width, width, rng);
  }

  nn::Mat<S> forward(const nn::Mat<S>& x, Cache* cache) const {
    nn::Mat<S> pre1 = l1.forward(x);
    nn::Mat<S> act1 = nn::relu(pre1);
    nn::Mat<S> sum = x + l2.forward(act1);
    nn::Mat<S> y = nn::relu(sum);
    if (cache) {
      cache->x = x;
      cache->pre1 = std::move(pre1);
      cache->act1 = std::move(act1);
      cache->sum = std::move(sum);
    }
    return y;
  }

  nn::Mat<S> backward(const nn::Mat<S>& dy, const Cache& cache) {
    nn::Mat<S> dsum = nn::relu_backward(cache.sum, dy);
    nn::Mat<S> dact1 = l2.backward(cache.act1, dsum);
    nn::Mat<S> dpre1 = nn::relu_backward(cache.pre1, dact1);
    nn::Mat<S> dx = l1.backward(cache.x, dpre1);
    dx += dsum;
    return dx;
  }

  void zero_grad() {
    l1.zero_grad();
    l2.zero_grad();
  }
  void collect(std::vector<nn::ParamRef<S>>& out) {
    l1.collect(out);
    l2.collect(out);
  }
};

template <typename S>
struct MtetrOutput {
  nn::Mat<S> dia_logits;  // T x 5
  nn::Mat<S> det_logits;  // T x 1
};

template <typename S>
class MtetrModel {
 public:
  struct Cache {
    nn::Mat<S> x;
    nn::Mat<S> stem_pre;
    std::vector<typename ResBlock<S>::Cache> blocks;
    nn::Mat<S> embed_in;
    std::vector<typename nn::TransformerLayer<S>::Cache> tf;
    typename nn::BiLstm<S>::Cache rnn;
    nn::Mat<S> rnn_out;
    nn::Mat<S> dia_pre, dia_act, det_pre, det_act;
  };

  MtetrModel() = default;

  explicit MtetrModel(const ModelConfig& cfg, std::uint64_t seed) { init(cfg, seed); }

  void init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    cfg_ = cfg;
    Rng rng = Rng::substream(seed, "mtetr-init");
    stem_.init(cfg.in_planes, cfg.planes, rng);
    blocks_.assign(static_cast<std::size_t>(cfg.res_blocks), {});
    for (auto& b : blocks_) b.init(cfg.planes, rng);
    embed_.init(cfg.planes, cfg.embed_dim, rng);
    tf_.assign(static_cast<std::size_t>(cfg.tf_layers), {});
    for (auto& l : tf_) l.init(cfg.d_model, cfg.heads, cfg.ff_dim, cfg.dropout, rng);
    rnn_.init(cfg.d_model, cfg.lstm_hidden, rng);
    dia1_.init(cfg.d_model, cfg.head_hidden, rng);
    dia2_.init(cfg.head_hidden, cfg.dia_out, rng);
    det1_.init(cfg.d_model, cfg.head_hidden, rng);
    det2_.init(cfg.head_hidden, cfg.det_out, rng);
    s_dia_ = S(0);
    s_det_ = S(0);
    gs_dia_ = S(0);
    gs_det_ = S(0);
  }

  const ModelConfig& config() const { return cfg_; }

  // Training forward when cache/dropout_rng are set; evaluation otherwise.
  MtetrOutput<S> forward(const nn::Mat<S>& x, Cache* cache = nullptr,
                         Rng* dropout_rng = nullptr) const {
    if (x.cols() != cfg_.in_planes)
      throw ValidationError("mtetr forward: feature width " + std::to_string(x.cols()) +
                            " != in_planes " + std::to_string(cfg_.in_planes));
    if (x.rows() < 1) throw ValidationError("mtetr forward: empty sequence");

    nn::Mat<S> stem_pre = stem_.forward(x);
    nn::Mat<S> h = nn::relu(stem_pre);
    if (cache) {
      cache->x = x;
      cache->stem_pre = std::move(stem_pre);
      cache->blocks.resize(blocks_.size());
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      h = blocks_[i].forward(h, cache ? &cache->blocks[i] : nullptr);

    if (cache) cache->embed_in = h;
    nn::Mat<S> e = embed_.forward(h);
    e += nn::positional_encoding<S>(e.rows(), e.cols());

    if (cache) cache->tf.resize(tf_.size());
    for (std::size_t i = 0; i < tf_.size(); ++i)
      e = tf_[i].forward(e, cache ? &cache->tf[i] : nullptr, dropout_rng);

    nn::Mat<S> r = rnn_.forward(e, cache ? &cache->rnn : nullptr);
    if (cache) cache->rnn_out = r;

    nn::Mat<S> dia_pre = dia1_.forward(r);
    nn::Mat<S> dia_act = nn::relu(dia_pre);
    nn::Mat<S> det_pre = det1_.forward(r);
    nn::Mat<S> det_act = nn::relu(det_pre);
    MtetrOutput<S> out;
    out.dia_logits = dia2_.forward(dia_act);
    out.det_logits = det2_.forward(det_act);
    if (cache) {
      cache->dia_pre = std::move(dia_pre);
      cache->dia_act = std::move(dia_act);
      cache->det_pre = std::move(det_pre);
      cache->det_act = std::move(det_act);
    }
    return out;
  }

  MtetrOutput<S> forward(const FeatureSequence& features) const {
    features.validate();
    nn::Mat<S> x = features.frames.template cast<S>();
    return forward(x);
  }

  void backward(const nn::Mat<S>& d_dia, const nn::Mat<S>& d_det, const Cache& cache) {
    nn::Mat<S> dr = dia1_.backward(cache.rnn_out,
                                   nn::relu_backward(cache.dia_pre,
                                                     dia2_.backward(cache.dia_act, d_dia)));
    dr += det1_.backward(cache.rnn_out,
                         nn::relu_backward(cache.det_pre,
                                           det2_.backward(cache.det_act, d_det)));
    nn::Mat<S> de = rnn_.backward(dr, cache.rnn);
    for (std::size_t i = tf_.size(); i-- > 0;) de = tf_[i].backward(de, cache.tf[i]);
    nn::Mat<S> dh = embed_.backward(cache.embed_in, de);
    for (std::size_t i = blocks_.size(); i-- > 0;)
      dh = blocks_[i].backward(dh, cache.blocks[i]);
    nn::Mat<S> dstem = nn::relu_backward(cache.stem_pre, dh);
    stem_.backward(cache.x, dstem);
  }

  void zero_grad() {
    stem_.zero_grad();
    for (auto& b : blocks_) b.zero_grad();
    embed_.zero_grad();
    for (auto& l : tf_) l.zero_grad();
    rnn_.zero_grad();
    dia1_.zero_grad();
    dia2_.zero_grad();
    det1_.zero_grad();
    det2_.zero_grad();
    gs_dia_ = S(0);
    gs_det_ = S(0);
  }

  std::vector<nn::ParamRef<S>> parameters() {
    std::vector<nn::ParamRef<S>> out;
    stem_.collect(out);
    for (auto& b : blocks_) b.collect(out);
    embed_.collect(out);
    for (auto& l : tf_) l.collect(out);
    rnn_.collect(out);
    dia1_.collect(out);
    dia2_.collect(out);
    det1_.collect(out);
    det2_.collect(out);
    out.push_back({&s_dia_, &gs_dia_, 1});
    out.push_back({&s_det_, &gs_det_, 1});
    return out;
  }

  UncertaintyState uncertainty() const {
    return {static_cast<double>(s_dia_), static_cast<double>(s_det_)};
  }

  void add_uncertainty_grads(double d_s_dia, double d_s_det) {
    gs_dia_ += static_cast<S>(d_s_dia);
    gs_det_ += static_cast<S>(d_s_det);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += static_cast<std::size_t>(p.size);
    return n;
  }

 private:
  ModelConfig cfg_;
  nn::Linear<S> stem_;
  std::vector<ResBlock<S>> blocks_;
  nn::Linear<S> embed_;
  std::vector<nn::TransformerLayer<S>> tf_;
  nn::BiLstm<S> rnn_;
  nn::Linear<S> dia1_, dia2_, det1_, det2_;
  S s_dia_ = S(0), s_det_ = S(0);
  S gs_dia_ = S(0), gs_det_ = S(0);
};

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

struct SmoothingConfig {
  int median_frames = 25;     // 0.5 s at 50 fps
  double min_segment_s = 0.5;
};

namespace detail {

// Median over a truncated window of categorical labels.
inline std::vector<int> median_filter_labels(const std::vector<int>& labels, int width) {
  if (width <= 1 || labels.size() <= 1) return labels;
  const long n = static_cast<long>(labels.size());
  const int half = width / 2;
  std::vector<int> out(labels.size());
  std::vector<int> window;
  window.reserve(static_cast<std::size_t>(width));
  for (long t = 0; t < n; ++t) {
    long lo = std::max<long>(0, t - half);
    long hi = std::min<long>(n - 1, t + half);
    window.assign(labels.begin() + lo, labels.begin() + hi + 1);
    std::size_t mid = window.size() / 2;
    std::nth_element(window.begin(), window.begin() + static_cast<long>(mid), window.end());
    out[static_cast<std::size_t>(t)] = window[mid];
  }
  return out;
}

struct LabelRun {
  int label = 0;
  long begin = 0;  // frame index, inclusive
  long end = 0;    // frame index, exclusive
  long length() const { return end - begin; }
};

inline std::vector<LabelRun> runs_of(const std::vector<int>& labels) {
  std::vector<LabelRun> runs;
  for (long t = 0; t < static_cast<long>(labels.size()); ++t) {
    int l = labels[static_cast<std::size_t>(t)];
    if (runs.empty() || runs.back().label != l) {
      runs.push_back({l, t, t + 1});
    } else {
      runs.back().end = t + 1;
    }
  }
  return runs;
}

// Repeatedly folds the shortest run below the threshold into its longer
// neighbor until every run is long enough (or one run remains).
inline void merge_short_runs(std::vector<LabelRun>& runs, long min_frames) {
  auto merge_neighbors = [&](std::size_t i) {
    // Fold runs[i] into a neighbor, preferring the longer one.
    bool into_prev;
    if (i == 0) {
      into_prev = false;
    } else if (i + 1 == runs.size()) {
      into_prev = true;
    } else {
      into_prev = runs[i - 1].length() >= runs[i + 1].length();
    }
    if (into_prev) {
      runs[i - 1].end = runs[i].end;
      runs.erase(runs.begin() + static_cast<long>(i));
    } else {
      runs[i + 1].begin = runs[i].begin;
      runs.erase(runs.begin() + static_cast<long>(i));
    }
  };

  while (runs.size() > 1) {
    std::size_t shortest = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
      if (runs[i].length() < runs[shortest].length()) shortest = i;
    if (runs[shortest].length() >= min_frames) break;
    merge_neighbors(shortest);
    // Adjacent runs can now share a label; recombine.
    for (std::size_t i = 1; i < runs.size();) {
      if (runs[i].label == runs[i - 1].label) {
        runs[i - 1].end = runs[i].end;
        runs.erase(runs.begin() + static_cast<long>(i));
      } else {
        ++i;
      }
    }
  }
}

}  // namespace detail

// argmax -> median smoothing -> short-run merging -> timed segments covering
// [0, T / frame_rate].
template <typename S>
std::vector<TimedSegment> decode(const nn::Mat<S>& dia_probs, double frame_rate,
                                 const SmoothingConfig& smoothing = {}) {
  if (dia_probs.rows() < 1) throw ValidationError("decode: empty probability matrix");
  if (!(frame_rate > 0)) throw RangeError("decode: frame_rate must be > 0");

  std::vector<int> labels(static_cast<std::size_t>(dia_probs.rows()));
  for (Eigen::Index r = 0; r < dia_probs.rows(); ++r) {
    Eigen::Index best = 0;
    dia_probs.row(r).maxCoeff(&best);
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  labels = detail::median_filter_labels(labels, smoothing.median_frames);
  auto runs = detail::runs_of(labels);
  long min_frames = static_cast<long>(std::llround(smoothing.min_segment_s * frame_rate));
  detail::merge_short_runs(runs, min_frames);

  std::vector<TimedSegment> out;
  for (const auto& run : runs) {
    TimedSegment seg;
    seg.start_s = static_cast<double>(run.begin) / frame_rate;
    seg.end_s = static_cast<double>(run.end) / frame_rate;
    seg.emotion = static_cast<EmotionLabel>(run.label);
    out.push_back(seg);
  }
  return out;
}

// Semicolon-joined annotation entries, e.g.
//   start_time: 00:00, end_time: 00:05, emotion: "Angry"
inline std::string format_segments(const std::vector<TimedSegment>& segments) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) out += "; ";
    out += "start_time: " + format_timestamp(segments[i].start_s) +
           ", end_time: " + format_timestamp(segments[i].end_s) + ", emotion: \"" +
           emotion_display_name(segments[i].emotion) + "\"";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data (class-conditioned Gaussian frames)
// ---------------------------------------------------------------------------

struct SyntheticExample {
  FeatureSequence features;
  std::vector<TimedSegment> segments;
  FrameTargets targets;
};

struct SyntheticConfig {
  double frame_rate = kFeatureFrameRate;
  int dim = kFeatureDim;
  double min_segment_s = 0.6;
  double max_segment_s = 1.6;
  double mean_scale = 0.3;  // class-mean magnitude per dimension
  double noise = 1.0;
};

// Fixed per-class mean vector, independent of the example seed.
inline Eigen::VectorXf synthetic_class_mean(int emotion_class, int dim, double scale) {
  Rng rng = Rng::substream(0x9c1a5eedull, "class-mean",
                           static_cast<std::uint64_t>(emotion_class));
  Eigen::VectorXf mu(dim);
  for (int i = 0; i < dim; ++i) mu(i) = static_cast<float>(scale * rng.normal());
  return mu;
}

inline SyntheticExample make_synthetic_example(const TransitionPlan& plan,
                                               std::uint64_t seed,
                                               const SyntheticConfig& cfg = {}) {
  plan.validate();
  Rng rng(mix_seed(seed, 0x5e9dull));
  std::vector<long> seg_frames;
  long total = 0;
  for (std::size_t i = 0; i < plan.emotions.size(); ++i) {
    double dur = rng.uniform(cfg.min_segment_s, cfg.max_segment_s);
    long frames = std::max<long>(1, std::lround(dur * cfg.frame_rate));
    seg_frames.push_back(frames);
    total += frames;
  }

  SyntheticExample ex;
  ex.features.frames.resize(total, cfg.dim);
  ex.features.frame_rate = cfg.frame_rate;
  long cursor = 0;
  for (std::size_t i = 0; i < plan.emotions.size(); ++i) {
    Eigen::VectorXf mu = synthetic_class_mean(static_cast<int>(plan.emotions[i]),
                                              cfg.dim, cfg.mean_scale);
    for (long t = 0; t < seg_frames[i]; ++t) {
      for (int d = 0; d < cfg.dim; ++d) {
        ex.features.frames(cursor + t, d) =
            mu(d) + static_cast<float>(cfg.noise * rng.normal());
      }
    }
    TimedSegment seg;
    seg.start_s = static_cast<double>(cursor) / cfg.frame_rate;
    seg.end_s = static_cast<double>(cursor + seg_frames[i]) / cfg.frame_rate;
    seg.emotion = plan.emotions[i];
    ex.segments.push_back(seg);
    cursor += seg_frames[i];
  }
  ex.targets = make_frame_targets(ex.segments, cfg.frame_rate, total);
  return ex;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double pos_weight_cap = 100.0;
  bool dropout_enabled = true;
};

struct TrainSample {
  FeatureSequence features;
  FrameTargets targets;
};

struct TrainResult {
  std::vector<double> loss_history;      // per-epoch mean total loss
  std::vector<double> dia_loss_history;  // per-epoch mean task losses
  std::vector<double> det_loss_history;
};

template <typename S>
TrainResult train(MtetrModel<S>& model, const std::vector<TrainSample>& dataset,
                  const TrainConfig& cfg) {
  if (dataset.empty()) throw TrainingError("train: empty dataset");
  if (cfg.epochs < 1) throw RangeError("train: epochs must be >= 1");

  for (const auto& s : dataset) {
    if (static_cast<std::size_t>(s.features.frames.rows()) != s.targets.dia.size() ||
        s.targets.dia.size() != s.targets.det.size())
      throw ValidationError("train: target length mismatch");
  }

  nn::Adam<S> opt(model.parameters(), cfg.lr);
  TrainResult result;
  const std::size_t n = dataset.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::substream(cfg.seed, "epoch-order",
                                     static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = shuffle_rng.uniform_index(i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_total = 0.0, epoch_dia = 0.0, epoch_det = 0.0;
    for (std::size_t step = 0; step < n; ++step) {
      const TrainSample& sample = dataset[order[step]];
      nn::Mat<S> x = sample.features.frames.template cast<S>();

      // Masks are keyed by sample id (not epoch) so a zero learning rate
      // yields an exactly constant loss history.
      Rng dropout_rng = Rng::substream(cfg.seed, "dropout", order[step]);
      Rng* drop = cfg.dropout_enabled && model.config().dropout > 0.0 ? &dropout_rng
                                                                      : nullptr;

      typename MtetrModel<S>::Cache cache;
      MtetrOutput<S> out = model.forward(x, &cache, drop);

      TaskLoss<S> dia = dia_cross_entropy(out.dia_logits, sample.targets.dia);
      double pw = det_pos_weight(sample.targets.det, cfg.pos_weight_cap);
      TaskLoss<S> det = det_binary_cross_entropy(out.det_logits, sample.targets.det, pw);

      UncertaintyState st = model.uncertainty();
      if (!std::isfinite(dia.value) || !std::isfinite(det.value) ||
          !std::isfinite(st.s_dia) || !std::isfinite(st.s_det))
        throw TrainingError("train: diverged at epoch " + std::to_string(epoch));
      double total = uncertainty_loss(dia.value, det.value, st);
      if (!std::isfinite(total))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch));
      UncertaintyGrads ug = uncertainty_grads(dia.value, det.value, st);

      model.zero_grad();
      nn::Mat<S> d_dia = dia.dlogits * static_cast<S>(ug.d_l_dia);
      nn::Mat<S> d_det = det.dlogits * static_cast<S>(ug.d_l_det);
      model.backward(d_dia, d_det, cache);
      model.add_uncertainty_grads(ug.d_s_dia, ug.d_s_det);
      opt.step();

      epoch_total += total;
      epoch_dia += dia.value;
      epoch_det += det.value;
    }
    result.loss_history.push_back(epoch_total / static_cast<double>(n));
    result.dia_loss_history.push_back(epoch_dia / static_cast<double>(n));
    result.det_loss_history.push_back(epoch_det / static_cast<double>(n));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace detail {

inline void put_i32(std::ostream& os, std::int32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::int32_t get_i32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return static_cast<std::int32_t>(v);
}

inline void put_f64(std::ostream& os, double v) {
  static_assert(sizeof(double) == 8);
  os.write(reinterpret_cast<const char*>(&v), 8);
}

inline double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw FormatError("checkpoint: truncated file");
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointMagic = 0x52544D45u;  // "EMTR"

template <typename S>
void save_checkpoint(std::ostream& os, MtetrModel<S>& model) {
  detail::put_i32(os, static_cast<std::int32_t>(kCheckpointMagic));
  detail::put_i32(os, kCheckpointFormatVersion);
  const ModelConfig& c = model.config();
  for (int v : {c.res_blocks, c.in_planes, c.planes, c.embed_dim, c.kernel, c.stride,
                c.tf_layers, c.heads, c.d_model, c.ff_dim, c.lstm_hidden,
                c.head_hidden, c.dia_out, c.det_out})
    detail::put_i32(os, v);
  detail::put_f64(os, c.dropout);

  auto params = model.parameters();
  detail::put_i32(os, static_cast<std::int32_t>(params.size()));
  for (const auto& p : params) {
    detail::put_i32(os, static_cast<std::int32_t>(p.size));
    for (std::ptrdiff_t i = 0; i < p.size; ++i)
      detail::put_f64(os, static_cast<double>(p.value[i]));
  }
}

template <typename S>
MtetrModel<S> load_checkpoint(std::istream& is) {
  if (static_cast<std::uint32_t>(detail::get_i32(is)) != kCheckpointMagic)
    throw FormatError("checkpoint: bad magic");
  int version = detail::get_i32(is);
  if (version != kCheckpointFormatVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  ModelConfig c;
  c.res_blocks = detail::get_i32(is);
  c.in_planes = detail::get_i32(is);
  c.planes = detail::get_i32(is);
  c.embed_dim = detail::get_i32(is);
  c.kernel = detail::get_i32(is);
  c.stride = detail::get_i32(is);
  c.tf_layers = detail::get_i32(is);
  c.heads = detail::get_i32(is);
  c.d_model = detail::get_i32(is);
  c.ff_dim = detail::get_i32(is);
  c.lstm_hidden = detail::get_i32(is);
  c.head_hidden = detail::get_i32(is);
  c.dia_out = detail::get_i32(is);
  c.det_out = detail::get_i32(is);
  c.dropout = detail::get_f64(is);

  MtetrModel<S> model(c, 0);
  auto params = model.parameters();
  int count = detail::get_i32(is);
  if (count != static_cast<int>(params.size()))
    throw FormatError("checkpoint: parameter group count mismatch");
  for (auto& p : params) {
    int size = detail::get_i32(is);
    if (size != static_cast<int>(p.size))
      throw FormatError("checkpoint: parameter size mismatch");
    for (std::ptrdiff_t i = 0; i < p.size; ++i)
      p.value[i] = static_cast<S>(detail::get_f64(is));
  }
  return model;
}

template <typename S>
void save_checkpoint_file(const std::string& path, MtetrModel<S>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("checkpoint: cannot open '" + path + "' for writing");
  save_checkpoint(os, model);
}

template <typename S>
MtetrModel<S> load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("checkpoint: cannot open '" + path + "'");
  return load_checkpoint<S>(is);
}

}  // namespace emotrans
