#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "minictx/corpus.hpp"
#include "minictx/eval.hpp"
#include "minictx/policy.hpp"

namespace minictx::eval {

namespace detail {
inline const corpus::QAExample& example_for(
    const std::vector<policy::SelectionResult>& results, std::size_t i,
    const std::vector<corpus::QAExample>& dataset,
    const std::unordered_map<std::string, std::size_t>& by_id) {
  auto it = by_id.find(results[i].question_id);
  if (it == by_id.end()) {
    throw DataError("selection result for unknown question id " + results[i].question_id);
  }
  return dataset[it->second];
}

inline std::unordered_map<std::string, std::size_t> index_by_id(
    const std::vector<corpus::QAExample>& dataset) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_id.emplace(dataset[i].id, i);
  return by_id;
}
}  // namespace detail

/// Fraction of questions whose merged selected context contains some gold
/// answer's normalized token sequence (Acc of the selection task).
inline double selection_accuracy(const std::vector<policy::SelectionResult>& results,
                                 const std::vector<corpus::QAExample>& dataset) {
  if (results.empty()) return 0.0;
  const auto by_id = detail::index_by_id(dataset);
  long correct = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& ex = detail::example_for(results, i, dataset, by_id);
    const auto merged = policy::merge_selected(ex, results[i].selected_indices);
    std::vector<std::string> hay;
    for (const auto& tok : merged.tokens) {
      for (auto& nt : normalize_tokens(tok.text)) hay.push_back(std::move(nt));
    }
    for (const auto& gold : ex.answer_texts) {
      const auto needle = normalize_tokens(gold);
      if (!needle.empty() && contains_subsequence(hay, needle)) {
        ++correct;
        break;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(results.size());
}

/// Fraction of questions with at least one oracle sentence inside the top-k
/// of the ranking. Questions without oracle labels count as misses.
inline std::map<int, double> top_k_accuracy(const std::vector<policy::SelectionResult>& results,
                                            const std::vector<corpus::QAExample>& dataset,
                                            const std::vector<int>& ks) {
  std::map<int, double> out;
  if (results.empty()) {
    for (int k : ks) out[k] = 0.0;
    return out;
  }
  const auto by_id = detail::index_by_id(dataset);
  for (int k : ks) {
    long hit = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& ex = detail::example_for(results, i, dataset, by_id);
      const std::set<int> oracle(ex.oracle_sentence_indices.begin(),
                                 ex.oracle_sentence_indices.end());
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                     results[i].ranked.size());
      for (std::size_t r = 0; r < take; ++r) {
        if (oracle.count(results[i].ranked[r].sentence_index)) {
          ++hit;
          break;
        }
      }
    }
    out[k] = static_cast<double>(hit) / static_cast<double>(results.size());
  }
  return out;
}

/// MAP of selector rankings against oracle-sentence relevance. Questions
/// with empty oracle sets are skipped and counted via n_skipped.
inline double selection_map(const std::vector<policy::SelectionResult>& results,
                            const std::vector<corpus::QAExample>& dataset,
                            std::size_t* n_skipped = nullptr) {
  const auto by_id = detail::index_by_id(dataset);
  std::vector<RankedQuery> queries;
  queries.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& ex = detail::example_for(results, i, dataset, by_id);
    RankedQuery q;
    for (const auto& s : results[i].ranked) q.ranking.push_back(s.sentence_index);
    q.relevant.insert(ex.oracle_sentence_indices.begin(), ex.oracle_sentence_indices.end());
    queries.push_back(std::move(q));
  }
  return mean_average_precision(queries, n_skipped);
}

inline double mean_selected(const std::vector<policy::SelectionResult>& results) {
  if (results.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : results) sum += static_cast<double>(r.selected_indices.size());
  return sum / static_cast<double>(results.size());
}

}  // namespace minictx::eval
