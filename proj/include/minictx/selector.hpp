#pragma once

#include <array>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "minictx/corpus.hpp"
#include "minictx/embed.hpp"
#include "minictx/encoder.hpp"
#include "minictx/nn.hpp"

namespace minictx::selector {

// Decoder of the sentence selector. Conventions fixed here:
//  * logits are [nonanswerable, answerable];
//  * W2 is stored as h slices; slice k holds the matrix applied as
//    h_i[k] = D_i^T W2_k q, i.e. entry (a,b) of slice k is W2[a,k,b];
//  * the max-pool routes gradient to the first maximal position per row.

struct SelectorGrads {
  encoder::EncoderGrads encoder;
  Tensor w, W2, W3;

  SelectorGrads() = default;
  SelectorGrads(int h, int h_d)
      : encoder("selector.encoder", h, h_d),
        w("selector.w", {static_cast<std::size_t>(h)}),
        W2("selector.W2",
           {static_cast<std::size_t>(h), static_cast<std::size_t>(h), static_cast<std::size_t>(h)}),
        W3("selector.W3", {static_cast<std::size_t>(h), 2}) {}

  void set_zero() {
    encoder.set_zero();
    w.set_zero();
    W2.set_zero();
    W3.set_zero();
  }
};

struct SelectorParams {
  int h = 0, h_d = 0;
  encoder::EncoderParams encoder;
  Tensor w, W2, W3;

  SelectorParams() = default;
  SelectorParams(int h_, int h_d_)
      : h(h_),
        h_d(h_d_),
        encoder("selector.encoder", h_, h_d_),
        w("selector.w", {static_cast<std::size_t>(h_)}),
        W2("selector.W2",
           {static_cast<std::size_t>(h_), static_cast<std::size_t>(h_),
            static_cast<std::size_t>(h_)}),
        W3("selector.W3", {static_cast<std::size_t>(h_), 2}) {}

  void init(Rng& rng) {
    encoder.init(rng);
    init_decoder(rng);
  }

  void init_decoder(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    w.init_uniform(rng, bound);
    W2.init_uniform(rng, bound);
    W3.init_uniform(rng, bound);
  }

  void collect(ParamList& out, SelectorGrads& g) {
    encoder.collect(out, g.encoder);
    out.push_back({&w, &g.w});
    out.push_back({&W2, &g.W2});
    out.push_back({&W3, &g.W3});
  }

  void collect_decoder(ParamList& out, SelectorGrads& g) {
    out.push_back({&w, &g.w});
    out.push_back({&W2, &g.W2});
    out.push_back({&W3, &g.W3});
  }
};

/// Score of one sentence: raw 2-class logits plus the probability that the
/// question is answerable from it (after the configured normalization).
struct SentenceScore {
  int sentence_index = 0;
  std::array<double, 2> raw_logits{0.0, 0.0};
  double score = 0.0;
};

struct DecoderCache {
  Mat D_enc, Q_enc;
  Vec beta, q_tilde;
  Mat M;  // h x h, column k = W2_k * q_tilde
  Mat H;  // h x L_s, column i = h_i
  std::vector<Eigen::Index> argmax;
  Vec h_pool;
};

/// Question summary plus the W2 contraction, computable once per question
/// and shared across that paragraph's sentences at inference.
struct QSide {
  Mat Q_enc;
  Vec beta, q_tilde;
  Mat M;
};

inline QSide make_q_side(const Mat& Q_enc, const SelectorParams& p) {
  QSide qs;
  qs.Q_enc = Q_enc;
  Vec u = Q_enc.transpose() * p.w.vec();
  qs.beta = nn::softmax(u);
  qs.q_tilde = Q_enc * qs.beta;
  qs.M.resize(p.h, p.h);
  for (int k = 0; k < p.h; ++k) {
    qs.M.col(k).noalias() = p.W2.slice(static_cast<std::size_t>(k)) * qs.q_tilde;
  }
  return qs;
}

inline Vec score_from_q_side(const Mat& D_enc, const QSide& qs, const SelectorParams& p,
                             DecoderCache* cache) {
  Mat H = qs.M.transpose() * D_enc;  // h x L_s
  Vec h_pool(p.h);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(p.h));
  for (int k = 0; k < p.h; ++k) {
    Eigen::Index best = 0;
    H.row(k).maxCoeff(&best);
    argmax[static_cast<std::size_t>(k)] = best;
    h_pool[k] = H(k, best);
  }
  Vec logits = p.W3.mat().transpose() * h_pool;
  if (cache) {
    cache->D_enc = D_enc;
    cache->Q_enc = qs.Q_enc;
    cache->beta = qs.beta;
    cache->q_tilde = qs.q_tilde;
    cache->M = qs.M;
    cache->H = std::move(H);
    cache->argmax = std::move(argmax);
    cache->h_pool = std::move(h_pool);
  }
  return logits;
}

/// Raw logits for one sentence given encodings (Eqs. of the decoder).
inline Vec score_sentence(const Mat& D_enc, const Mat& Q_enc, const SelectorParams& p,
                          DecoderCache* cache = nullptr) {
  return score_from_q_side(D_enc, make_q_side(Q_enc, p), p, cache);
}

/// Backward through the decoder. Accumulates parameter gradients and the
/// gradients with respect to the encodings.
inline void score_sentence_backward(const SelectorParams& p, const DecoderCache& c,
                                    const Vec& dlogits, SelectorGrads& g, Mat* dD_enc,
                                    Mat* dQ_enc) {
  g.W3.mat().noalias() += c.h_pool * dlogits.transpose();
  Vec dh_pool = p.W3.mat() * dlogits;
  Mat dH = Mat::Zero(c.H.rows(), c.H.cols());
  for (int k = 0; k < p.h; ++k) dH(k, c.argmax[static_cast<std::size_t>(k)]) = dh_pool[k];
  Mat dM = c.D_enc * dH.transpose();
  if (dD_enc) {
    dD_enc->resize(c.D_enc.rows(), c.D_enc.cols());
    dD_enc->noalias() = c.M * dH;
  }
  Vec dq = Vec::Zero(p.h);
  for (int k = 0; k < p.h; ++k) {
    const auto w2k = p.W2.slice(static_cast<std::size_t>(k));
    g.W2.slice(static_cast<std::size_t>(k)).noalias() += dM.col(k) * c.q_tilde.transpose();
    dq.noalias() += w2k.transpose() * dM.col(k);
  }
  Mat dQ = dq * c.beta.transpose();
  Vec dbeta = c.Q_enc.transpose() * dq;
  Vec du = nn::softmax_backward(c.beta, dbeta);
  g.w.vec().noalias() += c.Q_enc * du;
  dQ.noalias() += p.w.vec() * du.transpose();
  if (dQ_enc) *dQ_enc = std::move(dQ);
}

/// Cross-entropy loss of one (sentence, question, label) pair, label 1 if
/// the question is answerable from the sentence. Accumulates gradients.
inline double loss_and_grad(const std::vector<corpus::Token>& sentence,
                            const std::vector<corpus::Token>& question,
                            const embed::EmbeddingTable& table, const SelectorParams& p,
                            int label, double dropout_rate, nn::Mode mode, Rng* rng,
                            SelectorGrads& grads) {
  Mat D = embed::embed_tokens(table, sentence);
  Mat Q = embed::embed_tokens(table, question);
  encoder::EncodeCache enc_cache;
  auto [D_enc, Q_enc] = encoder::encode(D, Q, p.encoder, mode, rng, &enc_cache, dropout_rate);
  DecoderCache dec;
  Vec logits = score_from_q_side(D_enc, make_q_side(Q_enc, p), p, &dec);
  const double loss = nn::cross_entropy(logits, label);
  Vec dlogits = nn::cross_entropy_grad(logits, label);
  Mat dD_enc, dQ_enc;
  score_sentence_backward(p, dec, dlogits, grads, &dD_enc, &dQ_enc);
  encoder::encode_backward(p.encoder, enc_cache, dD_enc, dQ_enc, grads.encoder);
  return loss;
}

/// Scores every sentence of a paragraph against the question (inference).
/// With normalize, score_i = softmax over sentences of the answerable
/// logits; otherwise each sentence gets its own 2-class softmax. Workers
/// split the sentences into contiguous chunks scored in parallel; results
/// are merged in sentence order.
inline std::vector<SentenceScore> score_paragraph(
    const std::vector<std::vector<corpus::Token>>& sentences,
    const std::vector<corpus::Token>& question, const embed::EmbeddingTable& table,
    const SelectorParams& p, bool normalize, int workers = 1) {
  if (sentences.empty()) throw DataError("score_paragraph: no sentences");
  const std::size_t n = sentences.size();
  Mat Q = embed::embed_tokens(table, question);
  Mat Q_enc = nn::bilstm_forward(Q, p.encoder.q_bilstm, nullptr);
  QSide qs = make_q_side(Q_enc, p);
  std::vector<SentenceScore> out(n);

  const auto score_range = [&](std::size_t lo, std::size_t hi) {
    std::vector<Mat> Ds;
    Ds.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) Ds.push_back(embed::embed_tokens(table, sentences[i]));
    Mat W1Q = p.encoder.W1.mat() * Q;
    std::vector<Mat> Xs;
    Xs.reserve(Ds.size());
    for (const Mat& D : Ds) {
      Mat S = D.transpose() * W1Q;
      Mat alpha(S.rows(), S.cols());
      for (Eigen::Index r = 0; r < S.rows(); ++r) {
        alpha.row(r) = nn::softmax(S.row(r).transpose()).transpose();
      }
      Mat X(2 * p.h_d, D.cols());
      X.topRows(p.h_d) = D;
      X.bottomRows(p.h_d).noalias() = Q * alpha.transpose();
      Xs.push_back(std::move(X));
    }
    auto encs = nn::bilstm_forward_multi(Xs, p.encoder.doc_bilstm);
    for (std::size_t i = lo; i < hi; ++i) {
      Vec logits = score_from_q_side(encs[i - lo], qs, p, nullptr);
      out[i].sentence_index = static_cast<int>(i);
      out[i].raw_logits = {logits[0], logits[1]};
    }
  };

  const int nw = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (nw == 1) {
    score_range(0, n);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(nw));
    for (int t = 0; t < nw; ++t) {
      const std::size_t lo = n * static_cast<std::size_t>(t) / static_cast<std::size_t>(nw);
      const std::size_t hi = n * static_cast<std::size_t>(t + 1) / static_cast<std::size_t>(nw);
      if (lo < hi) threads.emplace_back(score_range, lo, hi);
    }
    for (auto& th : threads) th.join();
  }

  if (normalize) {
    Vec ans(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) ans[static_cast<Eigen::Index>(i)] = out[i].raw_logits[1];
    Vec probs = nn::softmax(ans);
    for (std::size_t i = 0; i < n; ++i) out[i].score = probs[static_cast<Eigen::Index>(i)];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      Vec logits(2);
      logits << out[i].raw_logits[0], out[i].raw_logits[1];
      out[i].score = nn::softmax(logits)[1];
    }
  }
  return out;
}

/// Builds a selector whose encoder tensors are copied by name from an
/// oracle-trained reader checkpoint (technique i); the decoder is freshly
/// initialized from decoder_seed. Missing or mis-shaped tensors raise a
/// DataError naming the tensor.
inline SelectorParams transfer_encoder_weights(const std::map<std::string, Tensor>& reader_ckpt,
                                               int h, int h_d, std::uint64_t decoder_seed) {
  SelectorParams p(h, h_d);
  Rng rng(decoder_seed);
  p.init_decoder(rng);
  encoder::EncoderGrads scratch("selector.encoder", h, h_d);
  ParamList enc_params;
  p.encoder.collect(enc_params, scratch);
  static const std::string kSelectorPrefix = "selector.";
  for (auto& ref : enc_params) {
    Tensor& dst = *ref.value;
    const std::string src_name = "reader." + dst.name().substr(kSelectorPrefix.size());
    auto it = reader_ckpt.find(src_name);
    if (it == reader_ckpt.end()) {
      throw DataError("weight transfer: missing tensor " + src_name);
    }
    if (!dst.same_shape(it->second)) {
      throw DataError("weight transfer: shape mismatch for tensor " + src_name);
    }
    std::copy(it->second.data(), it->second.data() + it->second.size(), dst.data());
  }
  return p;
}

}  // namespace minictx::selector
