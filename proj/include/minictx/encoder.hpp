#pragma once

#include <string>
#include <utility>
#include <vector>

#include "minictx/nn.hpp"
#include "minictx/tensor.hpp"

namespace minictx::encoder {

/// Shared encoder of selector and reader: question-aware embeddings through
/// a bilinear attention, then one BiLSTM over [D_i ; Dq_i] for the document
/// side and one over Q for the question side.
struct EncoderGrads {
  Tensor W1;
  nn::BiLstmGrads doc_bilstm, q_bilstm;

  EncoderGrads() = default;
  EncoderGrads(const std::string& prefix, int h, int h_d)
      : W1(prefix + ".W1", {static_cast<std::size_t>(h_d), static_cast<std::size_t>(h_d)}),
        doc_bilstm(prefix + ".doc_bilstm", 2 * h_d, h),
        q_bilstm(prefix + ".q_bilstm", h_d, h) {}

  void set_zero() {
    W1.set_zero();
    doc_bilstm.set_zero();
    q_bilstm.set_zero();
  }
};

struct EncoderParams {
  int h = 0, h_d = 0;
  Tensor W1;  // h_d x h_d
  nn::BiLstmParams doc_bilstm;  // input 2*h_d -> h
  nn::BiLstmParams q_bilstm;    // input h_d -> h

  EncoderParams() = default;
  EncoderParams(const std::string& prefix, int h_, int h_d_)
      : h(h_),
        h_d(h_d_),
        W1(prefix + ".W1", {static_cast<std::size_t>(h_d_), static_cast<std::size_t>(h_d_)}),
        doc_bilstm(prefix + ".doc_bilstm", 2 * h_d_, h_),
        q_bilstm(prefix + ".q_bilstm", h_d_, h_) {}

  void init(Rng& rng) {
    W1.init_uniform(rng, 1.0 / std::sqrt(static_cast<double>(h_d)));
    doc_bilstm.init(rng);
    q_bilstm.init(rng);
  }

  void collect(ParamList& out, EncoderGrads& g) {
    out.push_back({&W1, &g.W1});
    doc_bilstm.collect(out, g.doc_bilstm);
    q_bilstm.collect(out, g.q_bilstm);
  }
};

struct AttendCache {
  Mat D, Q;      // inputs as seen by the attention (post-dropout in training)
  Mat alpha;     // L_d x L_q, rows sum to 1
};

/// alpha_i = softmax over j of D_i^T W1 Q_j; column i of the result is
/// sum_j alpha_{i,j} Q_j.
inline Mat attend_question(const Mat& D, const Mat& Q, const Tensor& W1, AttendCache* cache) {
  Mat W1Q = W1.mat() * Q;                 // h_d x L_q
  Mat S = D.transpose() * W1Q;            // L_d x L_q
  Mat alpha(S.rows(), S.cols());
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    alpha.row(i) = nn::softmax(S.row(i).transpose()).transpose();
  }
  Mat Dq = Q * alpha.transpose();         // h_d x L_d
  if (cache) {
    cache->D = D;
    cache->Q = Q;
    cache->alpha = alpha;
  }
  return Dq;
}

/// Gradient of a loss through attend_question with respect to W1 only
/// (D and Q are fixed embeddings).
inline void attend_backward(const AttendCache& c, const Mat& dDq, Tensor& gW1) {
  Mat dalpha = dDq.transpose() * c.Q;     // L_d x L_q
  Mat dS(dalpha.rows(), dalpha.cols());
  for (Eigen::Index i = 0; i < dalpha.rows(); ++i) {
    dS.row(i) =
        nn::softmax_backward(c.alpha.row(i).transpose(), dalpha.row(i).transpose()).transpose();
  }
  gW1.mat().noalias() += c.D * dS * c.Q.transpose();
}

struct EncodeCache {
  AttendCache attend;
  nn::BiLstmCache doc, q;
  Mat mask_D, mask_Q, mask_Denc, mask_Qenc;
  bool train = false;
};

/// Full encoder pass. Training mode applies inverted dropout to the
/// embeddings and to the BiLSTM outputs (never to the recurrent state);
/// masks are drawn from rng in the fixed order D, Q, D_enc, Q_enc.
inline std::pair<Mat, Mat> encode(const Mat& D, const Mat& Q, const EncoderParams& p,
                                  nn::Mode mode, Rng* rng, EncodeCache* cache,
                                  double dropout_rate) {
  const bool train = mode == nn::Mode::kTrain;
  Mat Dd = D, Qd = Q;
  Mat mask_D, mask_Q, mask_Denc, mask_Qenc;
  if (train) {
    mask_D = nn::dropout_mask(D.rows(), D.cols(), dropout_rate, *rng);
    mask_Q = nn::dropout_mask(Q.rows(), Q.cols(), dropout_rate, *rng);
    mask_Denc = nn::dropout_mask(p.h, D.cols(), dropout_rate, *rng);
    mask_Qenc = nn::dropout_mask(p.h, Q.cols(), dropout_rate, *rng);
    Dd = D.cwiseProduct(mask_D);
    Qd = Q.cwiseProduct(mask_Q);
  }
  Mat Dq = attend_question(Dd, Qd, p.W1, cache ? &cache->attend : nullptr);
  Mat X(2 * p.h_d, D.cols());
  X.topRows(p.h_d) = Dd;
  X.bottomRows(p.h_d) = Dq;
  Mat D_enc = nn::bilstm_forward(X, p.doc_bilstm, cache ? &cache->doc : nullptr);
  Mat Q_enc = nn::bilstm_forward(Qd, p.q_bilstm, cache ? &cache->q : nullptr);
  if (train) {
    D_enc = D_enc.cwiseProduct(mask_Denc);
    Q_enc = Q_enc.cwiseProduct(mask_Qenc);
    if (cache) {
      cache->mask_D = std::move(mask_D);
      cache->mask_Q = std::move(mask_Q);
      cache->mask_Denc = std::move(mask_Denc);
      cache->mask_Qenc = std::move(mask_Qenc);
      cache->train = true;
    }
  } else if (cache) {
    cache->train = false;
  }
  return {std::move(D_enc), std::move(Q_enc)};
}

/// Backward through encode; accumulates into grads. Gradients with respect
/// to the raw embeddings are dropped (embeddings are not trained).
inline void encode_backward(const EncoderParams& p, const EncodeCache& cache, Mat dDenc,
                            Mat dQenc, EncoderGrads& grads) {
  if (cache.train) {
    dDenc = dDenc.cwiseProduct(cache.mask_Denc);
    dQenc = dQenc.cwiseProduct(cache.mask_Qenc);
  }
  Mat dX = nn::bilstm_backward(p.doc_bilstm, cache.doc, dDenc, grads.doc_bilstm);
  Mat dDq = dX.bottomRows(p.h_d);
  attend_backward(cache.attend, dDq, grads.W1);
  nn::bilstm_backward(p.q_bilstm, cache.q, dQenc, grads.q_bilstm);
}

/// Inference path for scoring many sentences against one question: the
/// question encoding and W1*Q are computed once, the per-sentence document
/// BiLSTMs run lockstep (one GEMM per time step across sentences).
inline std::vector<Mat> encode_sentences_infer(const std::vector<Mat>& Ds, const Mat& Q,
                                               const EncoderParams& p, Mat* Q_enc_out) {
  if (Q_enc_out) *Q_enc_out = nn::bilstm_forward(Q, p.q_bilstm, nullptr);
  Mat W1Q = p.W1.mat() * Q;
  std::vector<Mat> Xs;
  Xs.reserve(Ds.size());
  for (const Mat& D : Ds) {
    Mat S = D.transpose() * W1Q;
    Mat alpha(S.rows(), S.cols());
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
      alpha.row(i) = nn::softmax(S.row(i).transpose()).transpose();
    }
    Mat X(2 * p.h_d, D.cols());
    X.topRows(p.h_d) = D;
    X.bottomRows(p.h_d).noalias() = Q * alpha.transpose();
    Xs.push_back(std::move(X));
  }
  return nn::bilstm_forward_multi(Xs, p.doc_bilstm);
}

}  // namespace minictx::encoder
