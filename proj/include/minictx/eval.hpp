#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "minictx/tensor.hpp"

namespace minictx::eval {

/// SQuAD-style answer normalization: lowercase, delete ASCII punctuation,
/// drop the articles {a, an, the}, collapse whitespace to single spaces.
inline std::vector<std::string> normalize_tokens(const std::string& s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (unsigned char c : s) {
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : cleaned) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (auto& t : tokens) {
    if (t == "a" || t == "an" || t == "the") continue;
    out.push_back(std::move(t));
  }
  return out;
}

inline std::string normalize_answer(const std::string& s) {
  const auto toks = normalize_tokens(s);
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

/// True when `needle` appears as a contiguous subsequence of `haystack`.
inline bool contains_subsequence(const std::vector<std::string>& haystack,
                                 const std::vector<std::string>& needle) {
  if (needle.empty()) return false;
  if (needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (haystack[i + j] != needle[j]) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

inline int exact_match(const std::string& pred, const std::vector<std::string>& golds) {
  const std::string p = normalize_answer(pred);
  for (const auto& g : golds) {
    if (p == normalize_answer(g)) return 1;
  }
  return 0;
}

/// Bag-of-tokens F1 against the best gold. Empty-vs-empty scores 1,
/// empty-vs-nonempty scores 0.
inline double token_f1(const std::string& pred, const std::vector<std::string>& golds) {
  const auto p = normalize_tokens(pred);
  double best = 0.0;
  for (const auto& gold : golds) {
    const auto g = normalize_tokens(gold);
    if (p.empty() && g.empty()) {
      best = std::max(best, 1.0);
      continue;
    }
    if (p.empty() || g.empty()) continue;
    std::unordered_map<std::string, int> counts;
    for (const auto& t : g) counts[t]++;
    int common = 0;
    for (const auto& t : p) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++common;
      }
    }
    if (common == 0) continue;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

/// One query's ranking (best first) and its relevant index set.
struct RankedQuery {
  std::vector<int> ranking;
  std::set<int> relevant;
};

/// MAP over queries: AP = mean over relevant items of precision at the rank
/// where that item appears. Queries with an empty relevant set are skipped
/// (count reported through n_skipped when given).
inline double mean_average_precision(const std::vector<RankedQuery>& queries,
                                     std::size_t* n_skipped = nullptr) {
  double sum = 0.0;
  std::size_t used = 0, skipped = 0;
  for (const auto& q : queries) {
    if (q.relevant.empty()) {
      ++skipped;
      continue;
    }
    int hits = 0;
    double ap = 0.0;
    for (std::size_t rank = 0; rank < q.ranking.size(); ++rank) {
      if (q.relevant.count(q.ranking[rank])) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
      }
    }
    sum += ap / static_cast<double>(q.relevant.size());
    ++used;
  }
  if (n_skipped) *n_skipped = skipped;
  return used ? sum / static_cast<double>(used) : 0.0;
}

struct MetricsReport {
  std::map<int, double> top_k_accuracy;
  double map_score = 0.0;
  double selection_accuracy = 0.0;
  double em = 0.0;
  double f1 = 0.0;
  double mean_selected = 0.0;
  double speed_ratio = 1.0;
  long n_questions = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json tk = nlohmann::ordered_json::object();
    for (const auto& [k, v] : top_k_accuracy) tk[std::to_string(k)] = v;
    return nlohmann::ordered_json{{"top_k_accuracy", tk},
                                  {"map_score", map_score},
                                  {"selection_accuracy", selection_accuracy},
                                  {"em", em},
                                  {"f1", f1},
                                  {"mean_selected", mean_selected},
                                  {"speed_ratio", speed_ratio},
                                  {"n_questions", n_questions}};
  }
};

/// Ratio of median wall-clock times, baseline over variant (> 1 means the
/// variant is faster). Runs are interleaved; nothing executes concurrently.
inline double measure_speed(const std::function<void()>& baseline,
                            const std::function<void()>& variant, int repeats) {
  if (repeats < 3) throw ConfigError("measure_speed requires repeats >= 3");
  using clock = std::chrono::steady_clock;
  std::vector<double> ta, tb;
  ta.reserve(repeats);
  tb.reserve(repeats);
  for (int r = 0; r < repeats; ++r) {
    auto t0 = clock::now();
    baseline();
    auto t1 = clock::now();
    variant();
    auto t2 = clock::now();
    ta.push_back(std::chrono::duration<double>(t1 - t0).count());
    tb.push_back(std::chrono::duration<double>(t2 - t1).count());
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  return median(ta) / median(tb);
}

}  // namespace minictx::eval
