#pragma once

#include <string>
#include <utility>
#include <vector>

#include "minictx/corpus.hpp"
#include "minictx/embed.hpp"
#include "minictx/encoder.hpp"
#include "minictx/nn.hpp"

namespace minictx::reader {

struct ReaderGrads {
  encoder::EncoderGrads encoder;
  Tensor w1, W_start, W_end;

  ReaderGrads() = default;
  ReaderGrads(int h, int h_d)
      : encoder("reader.encoder", h, h_d),
        w1("reader.w1", {static_cast<std::size_t>(h)}),
        W_start("reader.W_start", {static_cast<std::size_t>(h), static_cast<std::size_t>(h)}),
        W_end("reader.W_end", {static_cast<std::size_t>(h), static_cast<std::size_t>(h)}) {}

  void set_zero() {
    encoder.set_zero();
    w1.set_zero();
    W_start.set_zero();
    W_end.set_zero();
  }
};

struct ReaderParams {
  int h = 0, h_d = 0;
  encoder::EncoderParams encoder;
  Tensor w1, W_start, W_end;

  ReaderParams() = default;
  ReaderParams(int h_, int h_d_)
      : h(h_),
        h_d(h_d_),
        encoder("reader.encoder", h_, h_d_),
        w1("reader.w1", {static_cast<std::size_t>(h_)}),
        W_start("reader.W_start", {static_cast<std::size_t>(h_), static_cast<std::size_t>(h_)}),
        W_end("reader.W_end", {static_cast<std::size_t>(h_), static_cast<std::size_t>(h_)}) {}

  void init(Rng& rng) {
    encoder.init(rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    w1.init_uniform(rng, bound);
    W_start.init_uniform(rng, bound);
    W_end.init_uniform(rng, bound);
  }

  void collect(ParamList& out, ReaderGrads& g) {
    encoder.collect(out, g.encoder);
    out.push_back({&w1, &g.w1});
    out.push_back({&W_start, &g.W_start});
    out.push_back({&W_end, &g.W_end});
  }
};

struct DecoderCache {
  Mat D_enc, Q_enc;
  Vec beta, q_tilde, vs, ve;
};

/// Bilinear span scores: beta = softmax(w1^T Q_enc), q = sum_j beta_j
/// Q_enc_j, start = D_enc^T W_start q, end = D_enc^T W_end q.
inline std::pair<Vec, Vec> decode_scores(const Mat& D_enc, const Mat& Q_enc,
                                         const ReaderParams& p, DecoderCache* cache = nullptr) {
  Vec u = Q_enc.transpose() * p.w1.vec();
  Vec beta = nn::softmax(u);
  Vec q_tilde = Q_enc * beta;
  Vec vs = p.W_start.mat() * q_tilde;
  Vec ve = p.W_end.mat() * q_tilde;
  Vec start = D_enc.transpose() * vs;
  Vec end = D_enc.transpose() * ve;
  if (cache) {
    cache->D_enc = D_enc;
    cache->Q_enc = Q_enc;
    cache->beta = std::move(beta);
    cache->q_tilde = std::move(q_tilde);
    cache->vs = std::move(vs);
    cache->ve = std::move(ve);
  }
  return {std::move(start), std::move(end)};
}

inline void decode_backward(const ReaderParams& p, const DecoderCache& c, const Vec& dstart,
                            const Vec& dend, ReaderGrads& g, Mat* dD_enc, Mat* dQ_enc) {
  Vec dvs = c.D_enc * dstart;
  Vec dve = c.D_enc * dend;
  Mat dD = c.vs * dstart.transpose() + c.ve * dend.transpose();
  g.W_start.mat().noalias() += dvs * c.q_tilde.transpose();
  g.W_end.mat().noalias() += dve * c.q_tilde.transpose();
  Vec dq = p.W_start.mat().transpose() * dvs + p.W_end.mat().transpose() * dve;
  Mat dQ = dq * c.beta.transpose();
  Vec dbeta = c.Q_enc.transpose() * dq;
  Vec du = nn::softmax_backward(c.beta, dbeta);
  g.w1.vec().noalias() += c.Q_enc * du;
  dQ.noalias() += p.w1.vec() * du.transpose();
  if (dD_enc) *dD_enc = std::move(dD);
  if (dQ_enc) *dQ_enc = std::move(dQ);
}

/// Predicted answer span; end is inclusive and text is recovered from the
/// original character offsets.
struct SpanPrediction {
  int start = 0;
  int end = 0;
  std::string text;
  Vec start_scores, end_scores;
};

/// Argmax over pairs (s, e) with s <= e < s + max_answer_len of
/// start[s] + end[e]; ties resolve to the smallest s, then smallest e.
inline SpanPrediction predict_span(const Vec& start_scores, const Vec& end_scores,
                                   int max_answer_len) {
  const Eigen::Index L = start_scores.size();
  SpanPrediction out;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < L; ++s) {
    const Eigen::Index e_max = std::min(L, s + max_answer_len);
    for (Eigen::Index e = s; e < e_max; ++e) {
      const double v = start_scores[s] + end_scores[e];
      if (v > best) {
        best = v;
        out.start = static_cast<int>(s);
        out.end = static_cast<int>(e);
      }
    }
  }
  out.start_scores = start_scores;
  out.end_scores = end_scores;
  return out;
}

/// Substring of the original context covered by tokens [start, end].
inline std::string span_text(const std::vector<corpus::Token>& tokens, const std::string& context,
                             int start, int end) {
  const auto& a = tokens.at(static_cast<std::size_t>(start));
  const auto& b = tokens.at(static_cast<std::size_t>(end));
  return context.substr(static_cast<std::size_t>(a.char_start),
                        static_cast<std::size_t>(b.char_end - a.char_start));
}

/// Full inference pass over an input token sequence.
inline SpanPrediction predict(const std::vector<corpus::Token>& input_tokens,
                              const std::vector<corpus::Token>& question_tokens,
                              const embed::EmbeddingTable& table, const ReaderParams& p,
                              const std::string& context, int max_answer_len) {
  Mat D = embed::embed_tokens(table, input_tokens);
  Mat Q = embed::embed_tokens(table, question_tokens);
  auto [D_enc, Q_enc] =
      encoder::encode(D, Q, p.encoder, nn::Mode::kInfer, nullptr, nullptr, 0.0);
  auto [start, end] = decode_scores(D_enc, Q_enc, p);
  SpanPrediction span = predict_span(start, end, max_answer_len);
  span.text = span_text(input_tokens, context, span.start, span.end);
  return span;
}

/// Start/end cross-entropy against gold token indices (end inclusive,
/// both in input-token coordinates). Accumulates gradients.
inline double loss_and_grad(const std::vector<corpus::Token>& input_tokens,
                            const std::vector<corpus::Token>& question_tokens,
                            const embed::EmbeddingTable& table, const ReaderParams& p,
                            int gold_start, int gold_end, double dropout_rate, nn::Mode mode,
                            Rng* rng, ReaderGrads& grads) {
  Mat D = embed::embed_tokens(table, input_tokens);
  Mat Q = embed::embed_tokens(table, question_tokens);
  encoder::EncodeCache enc_cache;
  auto [D_enc, Q_enc] = encoder::encode(D, Q, p.encoder, mode, rng, &enc_cache, dropout_rate);
  DecoderCache dec;
  auto [start, end] = decode_scores(D_enc, Q_enc, p, &dec);
  const double loss = nn::cross_entropy(start, gold_start) + nn::cross_entropy(end, gold_end);
  Vec dstart = nn::cross_entropy_grad(start, gold_start);
  Vec dend = nn::cross_entropy_grad(end, gold_end);
  Mat dD_enc, dQ_enc;
  decode_backward(p, dec, dstart, dend, grads, &dD_enc, &dQ_enc);
  encoder::encode_backward(p.encoder, enc_cache, dD_enc, dQ_enc, grads.encoder);
  return loss;
}

}  // namespace minictx::reader
