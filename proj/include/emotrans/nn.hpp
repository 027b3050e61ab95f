#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "emotrans/error.hpp"
#include "emotrans/rng.hpp"

// Minimal neural-network layers with explicit forward caches and hand-written
// backward passes. Everything is templated on the scalar so training runs in
// float while gradient checks run in double. Training is single-threaded;
// forward passes are const and reentrant given per-call caches.

namespace emotrans::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Row = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// Flat view of one parameter tensor and its gradient, for the optimizer.
template <typename S>
struct ParamRef {
  S* value = nullptr;
  S* grad = nullptr;
  std::ptrdiff_t size = 0;
};

template <typename S>
inline void glorot_init(Mat<S>& w, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      w(r, c) = static_cast<S>(rng.uniform(-limit, limit));
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <typename S>
struct Linear {
  Mat<S> w;   // in x out
  Row<S> b;   // 1 x out
  Mat<S> gw;
  Row<S> gb;

  void init(int in, int out, Rng& rng) {
    w.resize(in, out);
    glorot_init(w, rng);
    b = Row<S>::Zero(out);
    gw = Mat<S>::Zero(in, out);
    gb = Row<S>::Zero(out);
  }

  Mat<S> forward(const Mat<S>& x) const { return (x * w).rowwise() + b; }

  // x is the input that produced the upstream activations.
  Mat<S> backward(const Mat<S>& x, const Mat<S>& dy) {
    gw.noalias() += x.transpose() * dy;
    gb += dy.colwise().sum();
    return dy * w.transpose();
  }

  void zero_grad() {
    gw.setZero();
    gb.setZero();
  }

  void collect(std::vector<ParamRef<S>>& out) {
    out.push_back({w.data(), gw.data(), w.size()});
    out.push_back({b.data(), gb.data(), b.size()});
  }
};

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

template <typename S>
inline Mat<S> relu(const Mat<S>& x) {
  return x.cwiseMax(S(0));
}

template <typename S>
inline Mat<S> relu_backward(const Mat<S>& x, const Mat<S>& dy) {
  return ((x.array() > S(0)).template cast<S>() * dy.array()).matrix();
}

// ---------------------------------------------------------------------------
// Layer normalization (per row, learned affine)
// ---------------------------------------------------------------------------

template <typename S>
struct LayerNorm {
  Row<S> gamma;
  Row<S> beta;
  Row<S> ggamma;
  Row<S> gbeta;
  S eps = S(1e-5);

  struct Cache {
    Mat<S> xhat;
    Mat<S> inv_std;  // T x 1
  };

  void init(int dim) {
    gamma = Row<S>::Ones(dim);
    beta = Row<S>::Zero(dim);
    ggamma = Row<S>::Zero(dim);
    gbeta = Row<S>::Zero(dim);
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache) const {
    const auto d = static_cast<S>(x.cols());
    Mat<S> y(x.rows(), x.cols());
    Mat<S> xhat(x.rows(), x.cols());
    Mat<S> inv_std(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      S mu = x.row(r).mean();
      Row<S> centered = x.row(r).array() - mu;
      S var = centered.squaredNorm() / d;
      S istd = S(1) / std::sqrt(var + eps);
      xhat.row(r) = centered * istd;
      inv_std(r, 0) = istd;
      y.row(r) = xhat.row(r).cwiseProduct(gamma) + beta;
    }
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) {
    const auto d = static_cast<S>(dy.cols());
    Mat<S> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      Row<S> dyr = dy.row(r);
      Row<S> xh = cache.xhat.row(r);
      ggamma += dyr.cwiseProduct(xh);
      gbeta += dyr;
      Row<S> dxhat = dyr.cwiseProduct(gamma);
      S sum_dxhat = dxhat.sum();
      S sum_dxhat_xhat = dxhat.cwiseProduct(xh).sum();
      dx.row(r) = ((cache.inv_std(r, 0) / d) *
                   (d * dxhat.array() - sum_dxhat - xh.array() * sum_dxhat_xhat))
                      .matrix();
    }
    return dx;
  }

  void zero_grad() {
    ggamma.setZero();
    gbeta.setZero();
  }

  void collect(std::vector<ParamRef<S>>& out) {
    out.push_back({gamma.data(), ggamma.data(), gamma.size()});
    out.push_back({beta.data(), gbeta.data(), beta.size()});
  }
};

// ---------------------------------------------------------------------------
// Dropout (inverted scaling; identity when rng is null)
// ---------------------------------------------------------------------------

template <typename S>
struct DropoutCache {
  Mat<S> mask;  // empty means pass-through
};

template <typename S>
inline Mat<S> dropout_forward(const Mat<S>& x, double rate, Rng* rng,
                              DropoutCache<S>* cache) {
  if (rng == nullptr || rate <= 0.0) {
    if (cache) cache->mask.resize(0, 0);
    return x;
  }
  if (rate >= 1.0) throw RangeError("dropout: rate must be < 1");
  S keep = static_cast<S>(1.0 - rate);
  Mat<S> mask(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      mask(r, c) = rng->bernoulli(1.0 - rate) ? S(1) / keep : S(0);
  if (cache) cache->mask = mask;
  return x.cwiseProduct(mask);
}

template <typename S>
inline Mat<S> dropout_backward(const Mat<S>& dy, const DropoutCache<S>& cache) {
  if (cache.mask.size() == 0) return dy;
  return dy.cwiseProduct(cache.mask);
}

// ---------------------------------------------------------------------------
// Softmax over rows
// ---------------------------------------------------------------------------

template <typename S>
inline Mat<S> softmax_rows(const Mat<S>& x) {
  Mat<S> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    S m = x.row(r).maxCoeff();
    Row<S> e = (x.row(r).array() - m).exp();
    y.row(r) = e / e.sum();
  }
  return y;
}

// Given probabilities p = softmax(s) and dL/dp, returns dL/ds.
template <typename S>
inline Mat<S> softmax_rows_backward(const Mat<S>& p, const Mat<S>& dp) {
  Mat<S> ds(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    S dot = p.row(r).cwiseProduct(dp.row(r)).sum();
    ds.row(r) = (p.row(r).array() * (dp.row(r).array() - dot)).matrix();
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Sinusoidal positional encoding (additive, parameter-free)
// ---------------------------------------------------------------------------

template <typename S>
inline Mat<S> positional_encoding(Eigen::Index t_len, Eigen::Index dim) {
  Mat<S> pe(t_len, dim);
  for (Eigen::Index pos = 0; pos < t_len; ++pos) {
    for (Eigen::Index i = 0; i < dim; i += 2) {
      double angle = static_cast<double>(pos) /
                     std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
      pe(pos, i) = static_cast<S>(std::sin(angle));
      if (i + 1 < dim) pe(pos, i + 1) = static_cast<S>(std::cos(angle));
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention
// ---------------------------------------------------------------------------

template <typename S>
struct MultiHeadAttention {
  int d_model = 0;
  int heads = 0;
  Linear<S> wq, wk, wv, wo;

  struct Cache {
    Mat<S> x, q, k, v;
    std::vector<Mat<S>> probs;  // per head, T x T
    Mat<S> concat;
  };

  void init(int d_model_in, int heads_in, Rng& rng) {
    if (d_model_in % heads_in != 0)
      throw ValidationError("attention: d_model must divide by heads");
    d_model = d_model_in;
    heads = heads_in;
    wq.init(d_model, d_model, rng);
    wk.init(d_model, d_model, rng);
    wv.init(d_model, d_model, rng);
    wo.init(d_model, d_model, rng);
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache) const {
    const int dk = d_model / heads;
    const S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dk)));
    Mat<S> q = wq.forward(x), k = wk.forward(x), v = wv.forward(x);
    Mat<S> concat(x.rows(), d_model);
    std::vector<Mat<S>> probs;
    if (cache) probs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      auto qh = q.middleCols(h * dk, dk);
      auto kh = k.middleCols(h * dk, dk);
      auto vh = v.middleCols(h * dk, dk);
      Mat<S> scores = qh * kh.transpose() * scale;
      Mat<S> p = softmax_rows(scores);
      concat.middleCols(h * dk, dk) = p * vh;
      if (cache) probs.push_back(std::move(p));
    }
    Mat<S> out = wo.forward(concat);
    if (cache) {
      cache->x = x;
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->probs = std::move(probs);
      cache->concat = std::move(concat);
    }
    return out;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) {
    const int dk = d_model / heads;
    const S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dk)));
    Mat<S> dconcat = wo.backward(cache.concat, dy);
    Mat<S> dq = Mat<S>::Zero(cache.q.rows(), cache.q.cols());
    Mat<S> dk_m = Mat<S>::Zero(cache.k.rows(), cache.k.cols());
    Mat<S> dv = Mat<S>::Zero(cache.v.rows(), cache.v.cols());
    for (int h = 0; h < heads; ++h) {
      auto vh = cache.v.middleCols(h * dk, dk);
      auto qh = cache.q.middleCols(h * dk, dk);
      auto kh = cache.k.middleCols(h * dk, dk);
      const Mat<S>& p = cache.probs[static_cast<std::size_t>(h)];
      Mat<S> doh = dconcat.middleCols(h * dk, dk);
      Mat<S> dp = doh * vh.transpose();
      dv.middleCols(h * dk, dk) = p.transpose() * doh;
      Mat<S> ds = softmax_rows_backward(p, dp);
      dq.middleCols(h * dk, dk) = ds * kh * scale;
      dk_m.middleCols(h * dk, dk) = ds.transpose() * qh * scale;
    }
    Mat<S> dx = wq.backward(cache.x, dq);
    dx += wk.backward(cache.x, dk_m);
    dx += wv.backward(cache.x, dv);
    return dx;
  }

  void zero_grad() {
    wq.zero_grad();
    wk.zero_grad();
    wv.zero_grad();
    wo.zero_grad();
  }

  void collect(std::vector<ParamRef<S>>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
  }
};

// ---------------------------------------------------------------------------
// Transformer encoder layer (post-LN, as in the original encoder)
// ---------------------------------------------------------------------------

template <typename S>
struct TransformerLayer {
  MultiHeadAttention<S> attn;
  Linear<S> ff1, ff2;
  LayerNorm<S> ln1, ln2;
  double dropout_rate = 0.5;

  struct Cache {
    typename MultiHeadAttention<S>::Cache attn;
    DropoutCache<S> drop1, drop2;
    typename LayerNorm<S>::Cache ln1, ln2;
    Mat<S> ff1_in;   // after first residual + LN
    Mat<S> ff1_out;  // pre-ReLU
    Mat<S> ff_hidden;
  };

  void init(int d_model, int heads, int ff_dim, double dropout, Rng& rng) {
    attn.init(d_model, heads, rng);
    ff1.init(d_model, ff_dim, rng);
    ff2.init(ff_dim, d_model, rng);
    ln1.init(d_model);
    ln2.init(d_model);
    dropout_rate = dropout;
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache, Rng* dropout_rng) const {
    typename MultiHeadAttention<S>::Cache* ac = cache ? &cache->attn : nullptr;
    Mat<S> a = attn.forward(x, ac);
    a = dropout_forward(a, dropout_rate, dropout_rng, cache ? &cache->drop1 : nullptr);
    Mat<S> x1 = ln1.forward(x + a, cache ? &cache->ln1 : nullptr);

    Mat<S> ff1_out = ff1.forward(x1);
    Mat<S> hidden = relu(ff1_out);
    Mat<S> f = ff2.forward(hidden);
    f = dropout_forward(f, dropout_rate, dropout_rng, cache ? &cache->drop2 : nullptr);
    Mat<S> x2 = ln2.forward(x1 + f, cache ? &cache->ln2 : nullptr);

    if (cache) {
      cache->ff1_in = std::move(x1);
      cache->ff1_out = std::move(ff1_out);
      cache->ff_hidden = std::move(hidden);
    }
    return x2;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) {
    Mat<S> d_sum2 = ln2.backward(dy, cache.ln2);
    Mat<S> df = dropout_backward(d_sum2, cache.drop2);
    Mat<S> dhidden = ff2.backward(cache.ff_hidden, df);
    Mat<S> dff1 = relu_backward(cache.ff1_out, dhidden);
    Mat<S> dx1 = ff1.backward(cache.ff1_in, dff1);
    dx1 += d_sum2;

    Mat<S> d_sum1 = ln1.backward(dx1, cache.ln1);
    Mat<S> da = dropout_backward(d_sum1, cache.drop1);
    Mat<S> dx = attn.backward(da, cache.attn);
    dx += d_sum1;
    return dx;
  }

  void zero_grad() {
    attn.zero_grad();
    ff1.zero_grad();
    ff2.zero_grad();
    ln1.zero_grad();
    ln2.zero_grad();
  }

  void collect(std::vector<ParamRef<S>>& out) {
    attn.collect(out);
    ff1.collect(out);
    ff2.collect(out);
    ln1.collect(out);
    ln2.collect(out);
  }
};

// ---------------------------------------------------------------------------
// LSTM (single direction) and BiLSTM
// ---------------------------------------------------------------------------

template <typename S>
struct Lstm {
  int in_dim = 0;
  int hidden = 0;
  Mat<S> wx;  // in x 4H, gate order [i, f, g, o]
  Mat<S> wh;  // H x 4H
  Row<S> b;   // 1 x 4H
  Mat<S> gwx, gwh;
  Row<S> gb;

  struct Cache {
    Mat<S> x;
    Mat<S> i, f, g, o;   // T x H gate activations
    Mat<S> c, tanh_c;    // T x H
    Mat<S> h;            // T x H
  };

  void init(int in, int hidden_in, Rng& rng) {
    in_dim = in;
    hidden = hidden_in;
    wx.resize(in, 4 * hidden);
    wh.resize(hidden, 4 * hidden);
    glorot_init(wx, rng);
    glorot_init(wh, rng);
    b = Row<S>::Zero(4 * hidden);
    // Positive forget-gate bias helps early gradient flow.
    b.segment(hidden, hidden).setConstant(S(1));
    gwx = Mat<S>::Zero(in, 4 * hidden);
    gwh = Mat<S>::Zero(hidden, 4 * hidden);
    gb = Row<S>::Zero(4 * hidden);
  }

  static S sigmoid(S v) { return S(1) / (S(1) + std::exp(-v)); }

  // reversed=true runs right-to-left but still returns rows aligned with x.
  Mat<S> forward(const Mat<S>& x, Cache* cache, bool reversed) const {
    const Eigen::Index t_len = x.rows();
    Mat<S> h_out(t_len, hidden);
    Mat<S> ci(t_len, hidden), cf(t_len, hidden), cg(t_len, hidden), co(t_len, hidden);
    Mat<S> cc(t_len, hidden), ctanh(t_len, hidden);
    Row<S> h_prev = Row<S>::Zero(hidden);
    Row<S> c_prev = Row<S>::Zero(hidden);
    for (Eigen::Index step = 0; step < t_len; ++step) {
      Eigen::Index t = reversed ? t_len - 1 - step : step;
      Row<S> z = x.row(t) * wx + h_prev * wh + b;
      Row<S> ig(hidden), fg(hidden), gg(hidden), og(hidden);
      for (int j = 0; j < hidden; ++j) {
        ig(j) = sigmoid(z(j));
        fg(j) = sigmoid(z(hidden + j));
        gg(j) = std::tanh(z(2 * hidden + j));
        og(j) = sigmoid(z(3 * hidden + j));
      }
      Row<S> c_t = fg.cwiseProduct(c_prev) + ig.cwiseProduct(gg);
      Row<S> tc = c_t.array().tanh().matrix();
      Row<S> h_t = og.cwiseProduct(tc);
      ci.row(t) = ig;
      cf.row(t) = fg;
      cg.row(t) = gg;
      co.row(t) = og;
      cc.row(t) = c_t;
      ctanh.row(t) = tc;
      h_out.row(t) = h_t;
      h_prev = h_t;
      c_prev = c_t;
    }
    if (cache) {
      cache->x = x;
      cache->i = std::move(ci);
      cache->f = std::move(cf);
      cache->g = std::move(cg);
      cache->o = std::move(co);
      cache->c = std::move(cc);
      cache->tanh_c = std::move(ctanh);
      cache->h = h_out;
    }
    return h_out;
  }

  Mat<S> backward(const Mat<S>& dh_out, const Cache& cache, bool reversed) {
    const Eigen::Index t_len = dh_out.rows();
    Mat<S> dx = Mat<S>::Zero(t_len, in_dim);
    Row<S> dh_next = Row<S>::Zero(hidden);
    Row<S> dc_next = Row<S>::Zero(hidden);
    for (Eigen::Index step = t_len - 1; step >= 0; --step) {
      Eigen::Index t = reversed ? t_len - 1 - step : step;
      Row<S> dh = dh_out.row(t) + dh_next;
      Row<S> tc = cache.tanh_c.row(t);
      Row<S> og = cache.o.row(t);
      Row<S> dc = dh.cwiseProduct(og).cwiseProduct(
                      (Row<S>::Ones(hidden) - tc.cwiseProduct(tc))) +
                  dc_next;
      Row<S> ig = cache.i.row(t);
      Row<S> fg = cache.f.row(t);
      Row<S> gg = cache.g.row(t);
      Eigen::Index prev_t = reversed ? t + 1 : t - 1;
      bool has_prev = reversed ? (prev_t < t_len) : (prev_t >= 0);
      Row<S> c_prev = has_prev ? Row<S>(cache.c.row(prev_t)) : Row<S>::Zero(hidden);
      Row<S> h_prev = has_prev ? Row<S>(cache.h.row(prev_t)) : Row<S>::Zero(hidden);

      Row<S> d_og = dh.cwiseProduct(tc);
      Row<S> d_ig = dc.cwiseProduct(gg);
      Row<S> d_fg = dc.cwiseProduct(c_prev);
      Row<S> d_gg = dc.cwiseProduct(ig);

      Row<S> dz(4 * hidden);
      for (int j = 0; j < hidden; ++j) {
        dz(j) = d_ig(j) * ig(j) * (S(1) - ig(j));
        dz(hidden + j) = d_fg(j) * fg(j) * (S(1) - fg(j));
        dz(2 * hidden + j) = d_gg(j) * (S(1) - gg(j) * gg(j));
        dz(3 * hidden + j) = d_og(j) * og(j) * (S(1) - og(j));
      }
      gwx.noalias() += cache.x.row(t).transpose() * dz;
      gwh.noalias() += h_prev.transpose() * dz;
      gb += dz;
      dx.row(t) += dz * wx.transpose();
      dh_next = dz * wh.transpose();
      dc_next = dc.cwiseProduct(fg);
    }
    return dx;
  }

  void zero_grad() {
    gwx.setZero();
    gwh.setZero();
    gb.setZero();
  }

  void collect(std::vector<ParamRef<S>>& out) {
    out.push_back({wx.data(), gwx.data(), wx.size()});
    out.push_back({wh.data(), gwh.data(), wh.size()});
    out.push_back({b.data(), gb.data(), b.size()});
  }
};

template <typename S>
struct BiLstm {
  Lstm<S> fwd, bwd;

  struct Cache {
    typename Lstm<S>::Cache fwd, bwd;
  };

  void init(int in, int hidden, Rng& rng) {
    fwd.init(in, hidden, rng);
    bwd.init(in, hidden, rng);
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache) const {
    Mat<S> hf = fwd.forward(x, cache ? &cache->fwd : nullptr, false);
    Mat<S> hb = bwd.forward(x, cache ? &cache->bwd : nullptr, true);
    Mat<S> out(x.rows(), hf.cols() + hb.cols());
    out << hf, hb;
    return out;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) {
    const int h = fwd.hidden;
    Mat<S> dx = fwd.backward(dy.leftCols(h), cache.fwd, false);
    dx += bwd.backward(dy.rightCols(h), cache.bwd, true);
    return dx;
  }

  void zero_grad() {
    fwd.zero_grad();
    bwd.zero_grad();
  }

  void collect(std::vector<ParamRef<S>>& out) {
    fwd.collect(out);
    bwd.collect(out);
  }
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename S>
class Adam {
 public:
  Adam(std::vector<ParamRef<S>> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(static_cast<std::size_t>(p.size), S(0));
      v_.emplace_back(static_cast<std::size_t>(p.size), S(0));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::ptrdiff_t j = 0; j < p.size; ++j) {
        S g = p.grad[j];
        m[static_cast<std::size_t>(j)] =
            static_cast<S>(beta1_ * m[static_cast<std::size_t>(j)] + (1.0 - beta1_) * g);
        v[static_cast<std::size_t>(j)] = static_cast<S>(
            beta2_ * v[static_cast<std::size_t>(j)] + (1.0 - beta2_) * g * g);
        double mhat = m[static_cast<std::size_t>(j)] / bc1;
        double vhat = v[static_cast<std::size_t>(j)] / bc2;
        p.value[j] -= static_cast<S>(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<ParamRef<S>> params_;
  std::vector<std::vector<S>> m_, v_;
  double lr_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace emotrans::nn
