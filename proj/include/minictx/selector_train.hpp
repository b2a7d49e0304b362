#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "minictx/corpus.hpp"
#include "minictx/embed.hpp"
#include "minictx/eval.hpp"
#include "minictx/nn.hpp"
#include "minictx/reader.hpp"
#include "minictx/selector.hpp"

namespace minictx::selector {

/// One (sentence, question, label) training pair; pairs from the same
/// paragraph share group_index (used by the normalized objective).
struct TrainingPair {
  std::vector<corpus::Token> sentence;
  const corpus::QAExample* example = nullptr;
  int sentence_index = 0;
  int label = 0;  // 1 = answerable (oracle sentence)
  std::size_t group_index = 0;
};

struct BuildStats {
  long relabeled = 0;  // oracle sentences flipped to 0 by data modification
};

/// Label 1 for oracle sentences, 0 otherwise. With modify enabled
/// (technique ii), an oracle sentence is relabeled 0 when the given
/// oracle-trained reader scores token F1 = 0 on that sentence alone against
/// every gold answer. Non-oracle sentences are never relabeled.
inline std::vector<TrainingPair> build_selector_training_set(
    const std::vector<corpus::QAExample>& dataset, const embed::EmbeddingTable& table,
    const reader::ReaderParams* oracle_reader, bool modify, int max_answer_len,
    BuildStats* stats = nullptr) {
  if (modify && oracle_reader == nullptr) {
    throw ConfigError("data modification requires an oracle-trained reader");
  }
  std::vector<TrainingPair> pairs;
  for (std::size_t gi = 0; gi < dataset.size(); ++gi) {
    const auto& ex = dataset[gi];
    for (const auto& s : ex.sentences) {
      TrainingPair pair;
      pair.sentence = corpus::sentence_tokens(ex, s.index);
      pair.example = &ex;
      pair.sentence_index = s.index;
      pair.group_index = gi;
      const bool oracle = std::find(ex.oracle_sentence_indices.begin(),
                                    ex.oracle_sentence_indices.end(),
                                    s.index) != ex.oracle_sentence_indices.end();
      pair.label = oracle ? 1 : 0;
      if (oracle && modify) {
        const auto span = reader::predict(pair.sentence, ex.question_tokens, table,
                                          *oracle_reader, ex.context, max_answer_len);
        if (eval::token_f1(span.text, ex.answer_texts) == 0.0) {
          pair.label = 0;
          if (stats) ++stats->relabeled;
        }
      }
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

struct TrainLog {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
  long used_pairs = 0;
  long skipped_groups = 0;  // normalized objective: groups without a positive
};

/// Per-sentence 2-class cross-entropy training (the default objective).
inline TrainLog train_selector(const std::vector<TrainingPair>& training_set,
                               const embed::EmbeddingTable& table, SelectorParams& params,
                               const nn::Hyperparams& hp) {
  if (training_set.empty()) throw DataError("train_selector: empty training set");
  TrainLog log;
  log.used_pairs = static_cast<long>(training_set.size());
  if (hp.epochs <= 0) return log;

  SelectorGrads grads(params.h, params.h_d);
  ParamList plist;
  params.collect(plist, grads);
  nn::AdamState adam;
  adam.init(plist);
  Rng shuffle_rng = Rng(hp.seed).fork(1);
  Rng dropout_rng = Rng(hp.seed).fork(2);

  std::vector<std::size_t> order(training_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    long epoch_count = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(hp.batch_size));
      grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t b = pos; b < end; ++b) {
        const TrainingPair& pair = training_set[order[b]];
        batch_loss += loss_and_grad(pair.sentence, pair.example->question_tokens, table, params,
                                    pair.label, hp.dropout_rate, nn::Mode::kTrain, &dropout_rng,
                                    grads);
      }
      const double inv = 1.0 / static_cast<double>(end - pos);
      for (auto& ref : plist) ref.grad->vec() *= inv;
      batch_loss *= inv;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train_selector: non-finite loss at step " +
                           std::to_string(log.step_losses.size()));
      }
      nn::clip_global_norm(plist, hp.clip_norm);
      nn::adam_step(plist, adam, hp);
      log.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss * static_cast<double>(end - pos);
      epoch_count += static_cast<long>(end - pos);
    }
    log.epoch_losses.push_back(epoch_loss / static_cast<double>(epoch_count));
  }
  return log;
}

/// Normalized-objective variant (technique iii at training time): for each
/// paragraph, loss = -log softmax over its sentences' answerable logits at
/// the positive sentence. Paragraphs without a positive are skipped.
inline TrainLog train_selector_normalized(const std::vector<TrainingPair>& training_set,
                                          const embed::EmbeddingTable& table,
                                          SelectorParams& params, const nn::Hyperparams& hp) {
  if (training_set.empty()) throw DataError("train_selector: empty training set");
  // Group pairs by paragraph.
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> group_of;
  {
    std::size_t next = 0;
    std::unordered_map<std::size_t, std::size_t> seen;
    for (std::size_t i = 0; i < training_set.size(); ++i) {
      auto [it, inserted] = seen.emplace(training_set[i].group_index, next);
      if (inserted) {
        groups.emplace_back();
        ++next;
      }
      groups[it->second].push_back(i);
    }
  }
  TrainLog log;
  std::vector<std::vector<std::size_t>> usable;
  for (auto& g : groups) {
    const bool has_pos = std::any_of(g.begin(), g.end(), [&](std::size_t i) {
      return training_set[i].label == 1;
    });
    if (has_pos) {
      usable.push_back(std::move(g));
    } else {
      ++log.skipped_groups;
    }
  }
  if (usable.empty()) throw DataError("train_selector: no paragraph has a positive sentence");
  log.used_pairs = static_cast<long>(training_set.size());
  if (hp.epochs <= 0) return log;

  SelectorGrads grads(params.h, params.h_d);
  ParamList plist;
  params.collect(plist, grads);
  nn::AdamState adam;
  adam.init(plist);
  Rng shuffle_rng = Rng(hp.seed).fork(1);
  Rng dropout_rng = Rng(hp.seed).fork(2);

  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t groups_per_batch =
      std::max<std::size_t>(1, static_cast<std::size_t>(hp.batch_size) / 4);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    long epoch_count = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += groups_per_batch) {
      const std::size_t end = std::min(order.size(), pos + groups_per_batch);
      grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t b = pos; b < end; ++b) {
        const auto& group = usable[order[b]];
        // Forward every sentence of the paragraph, keeping caches.
        std::vector<encoder::EncodeCache> enc_caches(group.size());
        std::vector<DecoderCache> dec_caches(group.size());
        Vec answerable(static_cast<Eigen::Index>(group.size()));
        int positive = -1;
        for (std::size_t s = 0; s < group.size(); ++s) {
          const TrainingPair& pair = training_set[group[s]];
          if (pair.label == 1 && positive < 0) positive = static_cast<int>(s);
          Mat D = embed::embed_tokens(table, pair.sentence);
          Mat Q = embed::embed_tokens(table, pair.example->question_tokens);
          auto [D_enc, Q_enc] = encoder::encode(D, Q, params.encoder, nn::Mode::kTrain,
                                                &dropout_rng, &enc_caches[s], hp.dropout_rate);
          Vec logits = score_from_q_side(D_enc, make_q_side(Q_enc, params), params, &dec_caches[s]);
          answerable[static_cast<Eigen::Index>(s)] = logits[1];
        }
        batch_loss += nn::cross_entropy(answerable, positive);
        Vec dans = nn::cross_entropy_grad(answerable, positive);
        for (std::size_t s = 0; s < group.size(); ++s) {
          Vec dlogits(2);
          dlogits << 0.0, dans[static_cast<Eigen::Index>(s)];
          Mat dD_enc, dQ_enc;
          score_sentence_backward(params, dec_caches[s], dlogits, grads, &dD_enc, &dQ_enc);
          encoder::encode_backward(params.encoder, enc_caches[s], dD_enc, dQ_enc, grads.encoder);
        }
      }
      const double inv = 1.0 / static_cast<double>(end - pos);
      for (auto& ref : plist) ref.grad->vec() *= inv;
      batch_loss *= inv;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train_selector: non-finite loss at step " +
                           std::to_string(log.step_losses.size()));
      }
      nn::clip_global_norm(plist, hp.clip_norm);
      nn::adam_step(plist, adam, hp);
      log.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss * static_cast<double>(end - pos);
      epoch_count += static_cast<long>(end - pos);
    }
    log.epoch_losses.push_back(epoch_loss / static_cast<double>(epoch_count));
  }
  return log;
}

}  // namespace minictx::selector
