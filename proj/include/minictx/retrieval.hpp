#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "minictx/corpus.hpp"
#include "minictx/tensor.hpp"

namespace minictx::retrieval {

/// A retrieval unit is a token-text sequence (one sentence or paragraph).
using Unit = std::vector<std::string>;

inline Unit unit_from_tokens(const std::vector<corpus::Token>& tokens) {
  Unit u;
  u.reserve(tokens.size());
  for (const auto& t : tokens) u.push_back(t.text);
  return u;
}

struct SparseVector {
  std::map<int, double> entries;  // term id -> weight; zero weights omitted

  double norm() const {
    double sq = 0.0;
    for (const auto& [id, w] : entries) sq += w * w;
    return std::sqrt(sq);
  }

  double dot(const SparseVector& other) const {
    const SparseVector& small = entries.size() <= other.entries.size() ? *this : other;
    const SparseVector& large = entries.size() <= other.entries.size() ? other : *this;
    double s = 0.0;
    for (const auto& [id, w] : small.entries) {
      auto it = large.entries.find(id);
      if (it != large.entries.end()) s += w * it->second;
    }
    return s;
  }
};

/// Document frequencies of lowercased word n-grams, n in [1, n_max].
class TfidfIndex {
 public:
  TfidfIndex(int n_max, int n_docs) : n_max_(n_max), n_docs_(n_docs) {}

  int n_max() const { return n_max_; }
  int n_docs() const { return n_docs_; }
  std::size_t n_terms() const { return doc_freq_.size(); }

  int term_id(const std::string& term) const {
    auto it = term_ids_.find(term);
    return it == term_ids_.end() ? -1 : it->second;
  }
  int doc_freq(int id) const { return doc_freq_.at(static_cast<std::size_t>(id)); }

  int intern(const std::string& term) {
    auto [it, inserted] = term_ids_.emplace(term, static_cast<int>(doc_freq_.size()));
    if (inserted) doc_freq_.push_back(0);
    return it->second;
  }
  void bump(int id) { doc_freq_[static_cast<std::size_t>(id)]++; }

  /// idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1.
  double idf(int id) const {
    return std::log((1.0 + n_docs_) / (1.0 + doc_freq(id))) + 1.0;
  }

 private:
  int n_max_;
  int n_docs_;
  std::unordered_map<std::string, int> term_ids_;
  std::vector<int> doc_freq_;
};

namespace detail {
inline std::string lower(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

/// Joins words [i, i+n) with '\x1f' separators to form the n-gram key.
inline std::string ngram_key(const std::vector<std::string>& words, std::size_t i, int n) {
  std::string key = words[i];
  for (int j = 1; j < n; ++j) {
    key.push_back('\x1f');
    key += words[i + static_cast<std::size_t>(j)];
  }
  return key;
}

template <typename Fn>
inline void for_each_ngram(const Unit& unit, int n_max, Fn&& fn) {
  std::vector<std::string> words;
  words.reserve(unit.size());
  for (const auto& w : unit) words.push_back(lower(w));
  for (int n = 1; n <= n_max; ++n) {
    if (words.size() < static_cast<std::size_t>(n)) break;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
      fn(ngram_key(words, i, n));
    }
  }
}
}  // namespace detail

inline TfidfIndex build_index(const std::vector<Unit>& corpus_units, int n_max) {
  if (corpus_units.empty()) throw DataError("build_index: empty corpus");
  if (n_max < 1) throw ConfigError("build_index: n_max must be >= 1");
  TfidfIndex index(n_max, static_cast<int>(corpus_units.size()));
  std::vector<bool> seen;
  for (const auto& unit : corpus_units) {
    std::vector<int> ids;
    detail::for_each_ngram(unit, n_max, [&](const std::string& key) {
      ids.push_back(index.intern(key));
    });
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) index.bump(id);
  }
  return index;
}

/// tf-idf weights with raw term counts; terms unknown to the index are
/// dropped (they cannot match any indexed unit and a common query factor
/// does not change cosine ranking).
inline SparseVector vectorize(const TfidfIndex& index, const Unit& unit) {
  std::unordered_map<int, int> counts;
  detail::for_each_ngram(unit, index.n_max(), [&](const std::string& key) {
    const int id = index.term_id(key);
    if (id >= 0) counts[id]++;
  });
  SparseVector v;
  for (const auto& [id, tf] : counts) {
    v.entries[id] = static_cast<double>(tf) * index.idf(id);
  }
  return v;
}

/// Unit indices in order of descending cosine similarity to the query.
/// Ties break toward the lower index; zero-norm units rank last.
inline std::vector<int> rank_by_tfidf(const TfidfIndex& index, const Unit& query,
                                      const std::vector<Unit>& units) {
  if (units.empty()) throw DataError("rank_by_tfidf: empty unit list");
  const SparseVector q = vectorize(index, query);
  const double qn = q.norm();
  std::vector<std::pair<double, int>> scored;
  scored.reserve(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    const SparseVector v = vectorize(index, units[i]);
    const double n = v.norm();
    const double sim = (qn > 0.0 && n > 0.0) ? q.dot(v) / (qn * n) : 0.0;
    scored.emplace_back(sim, static_cast<int>(i));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  out.reserve(scored.size());
  for (const auto& [sim, idx] : scored) out.push_back(idx);
  return out;
}

/// Multi-document pre-filter: ranks paragraphs against the question and
/// keeps the top n. Sentence selection then runs inside the survivors only.
inline std::vector<int> filter_paragraphs(const Unit& question, const std::vector<Unit>& paragraphs,
                                          int top_n, int n_max = 2) {
  const TfidfIndex index = build_index(paragraphs, n_max);
  auto ranking = rank_by_tfidf(index, question, paragraphs);
  if (static_cast<int>(ranking.size()) > top_n) ranking.resize(static_cast<std::size_t>(top_n));
  return ranking;
}

/// TF-IDF sentence-selection baseline: per-sentence cosine scores against
/// the question, usable with the same Top-k / Dyn policies as the neural
/// selector.
inline std::vector<double> sentence_scores(const std::vector<Unit>& sentences, const Unit& question,
                                           int n_max = 2) {
  const TfidfIndex index = build_index(sentences, n_max);
  const SparseVector q = vectorize(index, question);
  const double qn = q.norm();
  std::vector<double> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    const SparseVector v = vectorize(index, s);
    const double n = v.norm();
    out.push_back((qn > 0.0 && n > 0.0) ? q.dot(v) / (qn * n) : 0.0);
  }
  return out;
}

}  // namespace minictx::retrieval
