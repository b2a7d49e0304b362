#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "minictx/rng.hpp"
#include "minictx/tensor.hpp"

namespace minictx::nn {

/// Hidden size h is split h/2 per BiLSTM direction, so h must be even.
struct Hyperparams {
  int h = 200;
  int h_d = 0;  // 0 = take the embedding table's dimension
  double dropout_rate = 0.2;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  // Training knobs the reference setup leaves open.
  int batch_size = 32;
  int epochs = 50;
  double clip_norm = 10.0;

  void validate() const {
    if (h <= 0 || h % 2 != 0) throw ConfigError("hidden size h must be positive and even");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must be in [0,1)");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
  }
};

enum class Mode { kTrain, kInfer };

// ---------------------------------------------------------------------------
// softmax / cross-entropy

/// Numerically stable softmax (max subtraction). Output sums to 1.
inline Vec softmax(const Vec& v) {
  const double m = v.maxCoeff();
  Vec e = (v.array() - m).exp();
  return e / e.sum();
}

/// Given y = softmax(x) and dL/dy, returns dL/dx.
inline Vec softmax_backward(const Vec& y, const Vec& dy) {
  const double dot = y.dot(dy);
  return (y.array() * (dy.array() - dot)).matrix();
}

/// -log softmax(logits)[label], computed via log-sum-exp.
inline double cross_entropy(const Vec& logits, int label) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits[label];
}

/// d cross_entropy / d logits = softmax(logits) - onehot(label).
inline Vec cross_entropy_grad(const Vec& logits, int label) {
  Vec g = softmax(logits);
  g[label] -= 1.0;
  return g;
}

// ---------------------------------------------------------------------------
// LSTM / BiLSTM
//
// Gate packing: the 4m rows of wx, wh and b are, in order, the blocks
// [input; forget; candidate; output]. Cell update:
//   z = wx x_t + wh h_{t-1} + b
//   i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
//   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)
// Initial h and c are zero. Forget-gate bias starts at +1.

struct LstmParams {
  Tensor wx, wh, b;
  int in_dim = 0, hidden = 0;

  LstmParams() = default;
  LstmParams(const std::string& prefix, int in, int m)
      : wx(prefix + ".wx", {static_cast<std::size_t>(4 * m), static_cast<std::size_t>(in)}),
        wh(prefix + ".wh", {static_cast<std::size_t>(4 * m), static_cast<std::size_t>(m)}),
        b(prefix + ".b", {static_cast<std::size_t>(4 * m)}),
        in_dim(in),
        hidden(m) {}

  void init(Rng& rng) {
    wx.init_uniform(rng, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    wh.init_uniform(rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
    b.set_zero();
    for (int k = 0; k < hidden; ++k) b[static_cast<std::size_t>(hidden + k)] = 1.0;
  }

  void collect(ParamList& out, Tensor* gwx, Tensor* gwh, Tensor* gb) {
    out.push_back({&wx, gwx});
    out.push_back({&wh, gwh});
    out.push_back({&b, gb});
  }
};

struct LstmGrads {
  Tensor wx, wh, b;
  LstmGrads() = default;
  LstmGrads(const std::string& prefix, int in, int m)
      : wx(prefix + ".wx", {static_cast<std::size_t>(4 * m), static_cast<std::size_t>(in)}),
        wh(prefix + ".wh", {static_cast<std::size_t>(4 * m), static_cast<std::size_t>(m)}),
        b(prefix + ".b", {static_cast<std::size_t>(4 * m)}) {}
  void set_zero() { wx.set_zero(); wh.set_zero(); b.set_zero(); }
};

struct LstmCache {
  Mat x;                    // d x L input as seen by this direction
  Mat gi, gf, gg, go;       // post-activation gates, m x L
  Mat c, tanh_c, h;         // cell states / outputs, m x L
};

/// Left-to-right LSTM pass. Returns h (m x L); fills cache when given.
inline Mat lstm_forward(const Mat& x, const LstmParams& p, LstmCache* cache) {
  const int m = p.hidden;
  const Eigen::Index L = x.cols();
  Mat h(m, L), c(m, L), gi(m, L), gf(m, L), gg(m, L), go(m, L), tanh_c(m, L);
  Vec h_prev = Vec::Zero(m), c_prev = Vec::Zero(m);
  const auto wx = p.wx.mat();
  const auto wh = p.wh.mat();
  const auto b = p.b.vec();
  Vec z(4 * m);
  for (Eigen::Index t = 0; t < L; ++t) {
    z.noalias() = wx * x.col(t);
    z.noalias() += wh * h_prev;
    z += b;
    gi.col(t) = (1.0 / (1.0 + (-z.segment(0, m).array()).exp())).matrix();
    gf.col(t) = (1.0 / (1.0 + (-z.segment(m, m).array()).exp())).matrix();
    gg.col(t) = z.segment(2 * m, m).array().tanh().matrix();
    go.col(t) = (1.0 / (1.0 + (-z.segment(3 * m, m).array()).exp())).matrix();
    c.col(t) = gf.col(t).cwiseProduct(c_prev) + gi.col(t).cwiseProduct(gg.col(t));
    tanh_c.col(t) = c.col(t).array().tanh().matrix();
    h.col(t) = go.col(t).cwiseProduct(tanh_c.col(t));
    h_prev = h.col(t);
    c_prev = c.col(t);
  }
  if (cache) {
    cache->x = x;
    cache->gi = std::move(gi);
    cache->gf = std::move(gf);
    cache->gg = std::move(gg);
    cache->go = std::move(go);
    cache->c = std::move(c);
    cache->tanh_c = std::move(tanh_c);
    cache->h = h;
  }
  return h;
}

/// BPTT for one direction. Accumulates into grads, returns dL/dx (d x L).
inline Mat lstm_backward(const LstmParams& p, const LstmCache& cc, const Mat& dh_out,
                         LstmGrads& grads) {
  const int m = p.hidden;
  const Eigen::Index L = cc.x.cols();
  Mat dx = Mat::Zero(cc.x.rows(), L);
  Vec dh_next = Vec::Zero(m), dc_next = Vec::Zero(m);
  auto gwx = grads.wx.mat();
  auto gwh = grads.wh.mat();
  auto gb = grads.b.vec();
  const auto wx = p.wx.mat();
  const auto wh = p.wh.mat();
  Vec dz(4 * m);
  for (Eigen::Index t = L - 1; t >= 0; --t) {
    Vec dh = dh_out.col(t) + dh_next;
    Vec dc = dc_next + (dh.array() * cc.go.col(t).array() *
                        (1.0 - cc.tanh_c.col(t).array().square()))
                           .matrix();
    const Vec c_prev = (t > 0) ? Vec(cc.c.col(t - 1)) : Vec(Vec::Zero(m));
    const Vec h_prev = (t > 0) ? Vec(cc.h.col(t - 1)) : Vec(Vec::Zero(m));
    Vec d_i = dc.cwiseProduct(cc.gg.col(t));
    Vec d_f = dc.cwiseProduct(c_prev);
    Vec d_g = dc.cwiseProduct(cc.gi.col(t));
    Vec d_o = dh.cwiseProduct(cc.tanh_c.col(t));
    dz.segment(0, m) = (d_i.array() * cc.gi.col(t).array() * (1.0 - cc.gi.col(t).array())).matrix();
    dz.segment(m, m) = (d_f.array() * cc.gf.col(t).array() * (1.0 - cc.gf.col(t).array())).matrix();
    dz.segment(2 * m, m) = (d_g.array() * (1.0 - cc.gg.col(t).array().square())).matrix();
    dz.segment(3 * m, m) = (d_o.array() * cc.go.col(t).array() * (1.0 - cc.go.col(t).array())).matrix();
    gwx.noalias() += dz * cc.x.col(t).transpose();
    gwh.noalias() += dz * h_prev.transpose();
    gb += dz;
    dx.col(t).noalias() = wx.transpose() * dz;
    dh_next.noalias() = wh.transpose() * dz;
    dc_next = dc.cwiseProduct(cc.gf.col(t));
  }
  return dx;
}

struct BiLstmParams {
  LstmParams fwd, bwd;
  int in_dim = 0, out_dim = 0;  // out_dim = 2 * per-direction hidden

  BiLstmParams() = default;
  BiLstmParams(const std::string& prefix, int in, int out)
      : fwd(prefix + ".fwd", in, out / 2),
        bwd(prefix + ".bwd", in, out / 2),
        in_dim(in),
        out_dim(out) {}

  void init(Rng& rng) {
    fwd.init(rng);
    bwd.init(rng);
  }
  void collect(ParamList& out, struct BiLstmGrads& g);
};

struct BiLstmGrads {
  LstmGrads fwd, bwd;
  BiLstmGrads() = default;
  BiLstmGrads(const std::string& prefix, int in, int out)
      : fwd(prefix + ".fwd", in, out / 2), bwd(prefix + ".bwd", in, out / 2) {}
  void set_zero() { fwd.set_zero(); bwd.set_zero(); }
};

inline void BiLstmParams::collect(ParamList& out, BiLstmGrads& g) {
  fwd.collect(out, &g.fwd.wx, &g.fwd.wh, &g.fwd.b);
  bwd.collect(out, &g.bwd.wx, &g.bwd.wh, &g.bwd.b);
}

struct BiLstmCache {
  LstmCache fwd, bwd;
};

/// Output column t = [forward h_t ; backward h_t]. The backward direction
/// runs over the reversed column order.
inline Mat bilstm_forward(const Mat& x, const BiLstmParams& p, BiLstmCache* cache) {
  const int m = p.fwd.hidden;
  Mat xr = x.rowwise().reverse();
  Mat hf = lstm_forward(x, p.fwd, cache ? &cache->fwd : nullptr);
  Mat hb = lstm_forward(xr, p.bwd, cache ? &cache->bwd : nullptr);
  Mat y(2 * m, x.cols());
  y.topRows(m) = hf;
  y.bottomRows(m) = hb.rowwise().reverse();
  return y;
}

inline Mat bilstm_backward(const BiLstmParams& p, const BiLstmCache& cache, const Mat& dy,
                           BiLstmGrads& grads) {
  const int m = p.fwd.hidden;
  Mat dhf = dy.topRows(m);
  Mat dhb = dy.bottomRows(m).rowwise().reverse();
  Mat dx = lstm_backward(p.fwd, cache.fwd, dhf, grads.fwd);
  Mat dxr = lstm_backward(p.bwd, cache.bwd, dhb, grads.bwd);
  dx += dxr.rowwise().reverse();
  return dx;
}

/// Inference-only lockstep pass over many sequences: one GEMM per time step
/// across all still-active sequences instead of per-sequence GEMVs. Matches
/// bilstm_forward to floating-point reassociation.
inline std::vector<Mat> bilstm_forward_multi(const std::vector<Mat>& xs,
                                             const BiLstmParams& p) {
  const int m = p.fwd.hidden;
  const std::size_t n = xs.size();
  std::vector<Mat> out(n);
  if (n == 0) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (xs[a].cols() != xs[b].cols()) return xs[a].cols() > xs[b].cols();
    return a < b;
  });
  const Eigen::Index lmax = xs[order[0]].cols();
  const Eigen::Index d = xs[order[0]].rows();
  for (std::size_t i = 0; i < n; ++i) out[i].resize(2 * m, xs[i].cols());

  Mat xbuf(d, n), z(4 * m, n);
  Mat h = Mat::Zero(m, n), c = Mat::Zero(m, n);
  const auto run = [&](const LstmParams& lp, bool reverse, int row_off) {
    const auto wx = lp.wx.mat();
    const auto wh = lp.wh.mat();
    const auto b = lp.b.vec();
    h.setZero();
    c.setZero();
    for (Eigen::Index t = 0; t < lmax; ++t) {
      // Sequences sorted by length descending: the active set is a prefix.
      Eigen::Index active = 0;
      while (active < static_cast<Eigen::Index>(n) &&
             xs[order[active]].cols() > t)
        ++active;
      if (active == 0) break;
      for (Eigen::Index j = 0; j < active; ++j) {
        const Mat& x = xs[order[j]];
        xbuf.col(j) = reverse ? x.col(x.cols() - 1 - t) : x.col(t);
      }
      auto za = z.leftCols(active);
      za.noalias() = wx * xbuf.leftCols(active);
      za.noalias() += wh * h.leftCols(active);
      za.colwise() += b;
      auto gi = (1.0 / (1.0 + (-za.topRows(m).array()).exp())).eval();
      auto gf = (1.0 / (1.0 + (-za.middleRows(m, m).array()).exp())).eval();
      auto gg = za.middleRows(2 * m, m).array().tanh().eval();
      auto go = (1.0 / (1.0 + (-za.bottomRows(m).array()).exp())).eval();
      c.leftCols(active) = (gf * c.leftCols(active).array() + gi * gg).matrix();
      h.leftCols(active) = (go * c.leftCols(active).array().tanh()).matrix();
      for (Eigen::Index j = 0; j < active; ++j) {
        Mat& y = out[order[j]];
        const Eigen::Index pos = reverse ? y.cols() - 1 - t : t;
        y.block(row_off, pos, m, 1) = h.col(j);
      }
    }
  };
  run(p.fwd, false, 0);
  run(p.bwd, true, m);
  return out;
}

// ---------------------------------------------------------------------------
// Dropout (inverted): mask entries are 0 with probability rate, else
// 1/(1-rate), so expectations match inference. Identity when rate == 0.

inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Mat mask(rows, cols);
  if (rate <= 0.0) {
    mask.setOnes();
    return mask;
  }
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      mask(i, j) = rng.next_double() < rate ? 0.0 : keep;
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<Vec> m, v;
  long step = 0;

  void init(const ParamList& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(Vec::Zero(static_cast<Eigen::Index>(p.value->size())));
      v.push_back(Vec::Zero(static_cast<Eigen::Index>(p.value->size())));
    }
    step = 0;
  }
};

/// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_global_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) sq += p.grad->vec().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& p : params) p.grad->vec() *= scale;
  }
  return norm;
}

/// One Adam update with bias correction, applied in registry order.
inline void adam_step(const ParamList& params, AdamState& state, const Hyperparams& hp) {
  if (state.m.size() != params.size()) state.init(params);
  for (const auto& p : params) {
    if (!p.grad->all_finite()) {
      throw NumericError("non-finite gradient in tensor " + p.grad->name());
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].value->vec();
    const auto g = params[k].grad->vec();
    state.m[k] = hp.beta1 * state.m[k] + (1.0 - hp.beta1) * g;
    state.v[k] = (hp.beta2 * state.v[k].array() + (1.0 - hp.beta2) * g.array().square()).matrix();
    const auto mhat = state.m[k].array() / bc1;
    const auto vhat = state.v[k].array() / bc2;
    theta.array() -= hp.lr * mhat / (vhat.sqrt() + hp.eps);
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t n_checked = 0;
};

/// Central differences against the analytic gradients already stored in the
/// grad tensors. loss_fn must be pure and deterministic (dropout disabled).
/// Relative error per component: |a - n| / max(1e-8, |a| + |n|).
template <typename LossFn>
GradCheckReport grad_check(LossFn&& loss_fn, const ParamList& params, double eps) {
  GradCheckReport rep;
  for (const auto& p : params) {
    Tensor& theta = *p.value;
    const Tensor& g = *p.grad;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + eps;
      const double lp = loss_fn();
      theta[i] = saved - eps;
      const double lm = loss_fn();
      theta[i] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double analytic = g[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ++rep.n_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_tensor = theta.name();
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

}  // namespace minictx::nn
