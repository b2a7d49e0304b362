#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "minictx/corpus.hpp"
#include "minictx/selector.hpp"

namespace minictx::policy {

struct Policy {
  enum class Kind { kTopK, kDyn } kind = Kind::kTopK;
  int k = 1;
  double th = 0.5;

  static Policy top_k(int k) { return {Kind::kTopK, k, 0.0}; }
  static Policy dyn(double th) { return {Kind::kDyn, 0, th}; }

  std::string name() const { return kind == Kind::kTopK ? "top_k" : "dyn"; }
  double value() const { return kind == Kind::kTopK ? static_cast<double>(k) : th; }
};

struct SelectionResult {
  std::string question_id;
  std::vector<selector::SentenceScore> ranked;  // descending by score
  std::vector<int> selected_indices;            // ascending original order
  Policy policy;
};

namespace detail {
inline std::vector<selector::SentenceScore> rank(const std::vector<selector::SentenceScore>& scores) {
  std::vector<selector::SentenceScore> ranked = scores;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const selector::SentenceScore& a, const selector::SentenceScore& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.sentence_index < b.sentence_index;
                   });
  return ranked;
}
}  // namespace detail

/// The k highest scores (all sentences when k >= n); ties break toward the
/// lower original index.
inline SelectionResult select_top_k(const std::vector<selector::SentenceScore>& scores, int k) {
  if (scores.empty()) throw DataError("select_top_k: empty score list");
  if (k < 1) throw ConfigError("select_top_k: k must be >= 1");
  SelectionResult res;
  res.policy = Policy::top_k(k);
  res.ranked = detail::rank(scores);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), res.ranked.size());
  for (std::size_t i = 0; i < take; ++i) res.selected_indices.push_back(res.ranked[i].sentence_index);
  std::sort(res.selected_indices.begin(), res.selected_indices.end());
  return res;
}

/// Keeps every sentence with score >= 1 - th; when no sentence qualifies,
/// falls back to the single top-scoring sentence, so the selection is never
/// empty.
inline SelectionResult select_dyn(const std::vector<selector::SentenceScore>& scores, double th) {
  if (scores.empty()) throw DataError("select_dyn: empty score list");
  if (th < 0.0 || th > 1.0) throw ConfigError("select_dyn: th must be in [0,1]");
  SelectionResult res;
  res.policy = Policy::dyn(th);
  res.ranked = detail::rank(scores);
  const double cutoff = 1.0 - th;
  for (const auto& s : scores) {
    if (s.score >= cutoff) res.selected_indices.push_back(s.sentence_index);
  }
  if (res.selected_indices.empty()) {
    res.selected_indices.push_back(res.ranked.front().sentence_index);
  }
  std::sort(res.selected_indices.begin(), res.selected_indices.end());
  return res;
}

/// Selected sentences concatenated in original document order, plus the
/// translation from merged-token indices back to document-token indices.
struct MergedContext {
  std::vector<corpus::Token> tokens;  // original character offsets retained
  std::vector<int> to_document;       // merged index -> document index
  std::vector<int> from_document;     // document index -> merged index, -1 if dropped
};

inline MergedContext merge_selected(const corpus::QAExample& ex,
                                    const std::vector<int>& selected_indices) {
  MergedContext m;
  m.from_document.assign(ex.document_tokens.size(), -1);
  for (int idx : selected_indices) {
    const auto& s = ex.sentences.at(static_cast<std::size_t>(idx));
    for (int t = s.token_start; t < s.token_end; ++t) {
      m.from_document[static_cast<std::size_t>(t)] = static_cast<int>(m.tokens.size());
      m.to_document.push_back(t);
      m.tokens.push_back(ex.document_tokens[static_cast<std::size_t>(t)]);
    }
  }
  return m;
}

/// One JSON line per question: {id, policy, th_or_k, scores, selected}.
inline nlohmann::ordered_json selection_to_json(const SelectionResult& r) {
  std::vector<double> scores;
  std::vector<int> order(r.ranked.size());
  scores.resize(r.ranked.size());
  for (const auto& s : r.ranked) {
    scores[static_cast<std::size_t>(s.sentence_index)] = s.score;
  }
  return nlohmann::ordered_json{{"id", r.question_id},
                                {"policy", r.policy.name()},
                                {"th_or_k", r.policy.value()},
                                {"scores", scores},
                                {"selected", r.selected_indices}};
}

inline SelectionResult selection_from_json(const nlohmann::json& j) {
  SelectionResult r;
  r.question_id = j.at("id").get<std::string>();
  const std::string kind = j.at("policy").get<std::string>();
  if (kind == "top_k") {
    r.policy = Policy::top_k(static_cast<int>(j.at("th_or_k").get<double>()));
  } else if (kind == "dyn") {
    r.policy = Policy::dyn(j.at("th_or_k").get<double>());
  } else {
    throw DataError("selection dump: unknown policy '" + kind + "'");
  }
  const auto scores = j.at("scores").get<std::vector<double>>();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    selector::SentenceScore s;
    s.sentence_index = static_cast<int>(i);
    s.score = scores[i];
    r.ranked.push_back(s);
  }
  r.ranked = detail::rank(r.ranked);
  r.selected_indices = j.at("selected").get<std::vector<int>>();
  return r;
}

}  // namespace minictx::policy
