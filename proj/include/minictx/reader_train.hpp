#pragma once

#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "minictx/corpus.hpp"
#include "minictx/embed.hpp"
#include "minictx/nn.hpp"
#include "minictx/policy.hpp"
#include "minictx/reader.hpp"

namespace minictx::reader {

enum class InputMode { kFull, kOracle, kMinimal };

inline InputMode input_mode_from_string(const std::string& s) {
  if (s == "full") return InputMode::kFull;
  if (s == "oracle") return InputMode::kOracle;
  if (s == "minimal") return InputMode::kMinimal;
  throw ConfigError("unknown input mode '" + s + "'");
}

/// Supplies the selected sentence indices for Minimal mode.
using SelectionProvider = std::function<std::vector<int>(const corpus::QAExample&)>;

struct TrainingItem {
  std::vector<corpus::Token> input_tokens;
  const corpus::QAExample* example = nullptr;
  int gold_start = 0;  // input-token coordinates
  int gold_end = 0;    // inclusive
};

namespace detail {
/// Remaps the first aligned answer into merged coordinates; fails when the
/// span is not fully and contiguously covered by the selection.
inline std::optional<std::pair<int, int>> remap_gold(const corpus::QAExample& ex,
                                                     const policy::MergedContext& merged) {
  for (const auto& a : ex.answers) {
    bool ok = a.token_end > a.token_start;
    int prev = -2;
    for (int t = a.token_start; t < a.token_end && ok; ++t) {
      const int m = merged.from_document[static_cast<std::size_t>(t)];
      if (m < 0 || (prev != -2 && m != prev + 1)) ok = false;
      prev = m;
    }
    if (ok) {
      return std::make_pair(merged.from_document[static_cast<std::size_t>(a.token_start)],
                            merged.from_document[static_cast<std::size_t>(a.token_end - 1)]);
    }
  }
  return std::nullopt;
}
}  // namespace detail

/// Expands one example into the reader's training input under the given
/// mode, or nothing when no gold span lies inside that input.
inline std::optional<TrainingItem> make_training_item(const corpus::QAExample& ex,
                                                      InputMode mode,
                                                      const SelectionProvider& provider) {
  if (ex.answers.empty()) return std::nullopt;
  TrainingItem item;
  item.example = &ex;
  std::vector<int> selected;
  switch (mode) {
    case InputMode::kFull: {
      selected.resize(ex.sentences.size());
      for (std::size_t i = 0; i < ex.sentences.size(); ++i) selected[i] = static_cast<int>(i);
      break;
    }
    case InputMode::kOracle: {
      if (ex.oracle_sentence_indices.empty()) return std::nullopt;
      selected = {ex.oracle_sentence_indices.front()};
      break;
    }
    case InputMode::kMinimal: {
      if (!provider) throw ConfigError("minimal mode requires a selection provider");
      selected = provider(ex);
      if (selected.empty()) return std::nullopt;
      break;
    }
  }
  const auto merged = policy::merge_selected(ex, selected);
  if (merged.tokens.empty()) return std::nullopt;
  const auto gold = detail::remap_gold(ex, merged);
  if (!gold) return std::nullopt;
  item.input_tokens = merged.tokens;
  item.gold_start = gold->first;
  item.gold_end = gold->second;
  return item;
}

struct TrainLog {
  std::vector<double> step_losses;   // mean loss per optimizer step
  std::vector<double> epoch_losses;  // mean loss per epoch
  long skipped_examples = 0;
  long used_examples = 0;
};

/// Start/end cross-entropy training against the first gold answer.
/// Examples without a usable gold span in the chosen input are skipped and
/// counted. Deterministic for a fixed (seed, dataset, mode).
inline TrainLog train_reader(const std::vector<corpus::QAExample>& dataset,
                             const embed::EmbeddingTable& table, ReaderParams& params,
                             const nn::Hyperparams& hp, InputMode mode,
                             const SelectionProvider& provider = nullptr) {
  if (dataset.empty()) throw DataError("train_reader: empty dataset");
  TrainLog log;
  std::vector<TrainingItem> items;
  for (const auto& ex : dataset) {
    auto item = make_training_item(ex, mode, provider);
    if (item) {
      items.push_back(std::move(*item));
    } else {
      ++log.skipped_examples;
    }
  }
  log.used_examples = static_cast<long>(items.size());
  if (items.empty() || hp.epochs <= 0) return log;

  ReaderGrads grads(params.h, params.h_d);
  ParamList plist;
  params.collect(plist, grads);
  nn::AdamState adam;
  adam.init(plist);
  Rng shuffle_rng = Rng(hp.seed).fork(1);
  Rng dropout_rng = Rng(hp.seed).fork(2);

  std::vector<std::size_t> order(items.size());
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
        const TrainingItem& it = items[order[b]];
        batch_loss += loss_and_grad(it.input_tokens, it.example->question_tokens, table, params,
                                    it.gold_start, it.gold_end, hp.dropout_rate, nn::Mode::kTrain,
                                    &dropout_rng, grads);
      }
      const double inv = 1.0 / static_cast<double>(end - pos);
      for (auto& ref : plist) ref.grad->vec() *= inv;
      batch_loss *= inv;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train_reader: non-finite loss at step " +
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

}  // namespace minictx::reader
