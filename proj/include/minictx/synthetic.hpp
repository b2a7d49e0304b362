#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "minictx/rng.hpp"
#include "minictx/tensor.hpp"

namespace minictx::synthetic {

// Lexical-overlap QA corpus in SQuAD schema. Each paragraph carries one
// question; the question shares its two content words (subject, verb) with
// exactly one sentence, which contains the marked answer entity. Distractor
// sentences draw subject, verb and entity disjoint from the question's.
// The companion adversarial distractor for a question reuses its subject
// with a different verb and a fake entity, so a lexical-overlap selector
// can rank it below the oracle sentence while a span reader may still be
// drawn to the fake entity.

struct SyntheticSpec {
  int n_questions = 200;
  int sentences_per_doc = 5;
  int vocab_size = 60;
  std::uint64_t seed = 7;
};

namespace detail {
inline std::string pseudo_word(Rng& rng, int syllables) {
  static const char* kConsonants = "bdfgklmnprstvz";
  static const char* kVowels = "aeiou";
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w.push_back(kConsonants[rng.next_index(14)]);
    w.push_back(kVowels[rng.next_index(5)]);
  }
  return w;
}

inline std::vector<std::string> make_pool(Rng& rng, int size, std::set<std::string>& used) {
  std::vector<std::string> pool;
  pool.reserve(static_cast<std::size_t>(size));
  while (static_cast<int>(pool.size()) < size) {
    std::string w = pseudo_word(rng, 2 + static_cast<int>(rng.next_index(2)));
    if (used.insert(w).second) pool.push_back(std::move(w));
  }
  return pool;
}

template <typename T>
inline const T& pick(Rng& rng, const std::vector<T>& pool) {
  return pool[rng.next_index(pool.size())];
}
}  // namespace detail

struct SyntheticOutput {
  nlohmann::ordered_json dataset;
  std::vector<std::string> adversarial_distractors;  // one per question
};

inline SyntheticOutput generate(const SyntheticSpec& spec) {
  if (spec.n_questions <= 0 || spec.sentences_per_doc <= 0 || spec.vocab_size <= 0) {
    throw ConfigError("gen-synthetic: all size parameters must be positive");
  }
  const int n_sent = spec.sentences_per_doc;
  Rng rng(spec.seed);
  std::set<std::string> used = {"the", "what", "who", "did"};
  const int pool_size = std::max({6, n_sent + 2, spec.vocab_size / 3});
  const auto subjects = detail::make_pool(rng, pool_size, used);
  const auto verbs = detail::make_pool(rng, pool_size, used);
  const auto entities = detail::make_pool(rng, std::max(pool_size, 2 * n_sent + 4), used);
  static const std::vector<std::string> kFillers = {"later", "again", "yesterday", "quietly"};

  nlohmann::ordered_json paragraphs = nlohmann::ordered_json::array();
  std::vector<std::string> adversarial;
  adversarial.reserve(static_cast<std::size_t>(spec.n_questions));

  for (int q = 0; q < spec.n_questions; ++q) {
    const std::string& subj = detail::pick(rng, subjects);
    const std::string& verb = detail::pick(rng, verbs);
    // Entities distinct within the document: [0] (+ [n_sent+1] when the
    // answer is two words) belong to the answer, [1..n_sent] to distractors.
    std::vector<std::string> ent;
    while (static_cast<int>(ent.size()) < n_sent + 2) {
      const std::string& e = detail::pick(rng, entities);
      if (std::find(ent.begin(), ent.end(), e) == ent.end()) ent.push_back(e);
    }
    const bool two_word = rng.next_double() < 0.2;
    const std::string answer = two_word ? ent[0] + " " + ent[static_cast<std::size_t>(n_sent + 1)]
                                        : ent[0];

    const int oracle_pos = static_cast<int>(rng.next_index(static_cast<std::size_t>(n_sent)));
    std::vector<std::string> sentences;
    int answer_offset_in_sentence = -1;  // within the oracle sentence
    for (int s = 0; s < n_sent; ++s) {
      const std::string prefix = rng.next_double() < 0.5
                                     ? detail::pick(rng, kFillers) + " the "
                                     : "The ";
      if (s == oracle_pos) {
        std::string head = prefix + subj + " " + verb + " the ";
        answer_offset_in_sentence = static_cast<int>(head.size());
        sentences.push_back(head + answer + " .");
      } else {
        std::string ds = subj, dv = verb;
        while (ds == subj) ds = detail::pick(rng, subjects);
        while (dv == verb) dv = detail::pick(rng, verbs);
        sentences.push_back(prefix + ds + " " + dv + " the " +
                            ent[static_cast<std::size_t>(s + 1)] + " .");
      }
    }
    std::string context;
    int answer_start = -1;
    for (int s = 0; s < n_sent; ++s) {
      if (s > 0) context += " ";
      if (s == oracle_pos) answer_start = static_cast<int>(context.size()) + answer_offset_in_sentence;
      context += sentences[static_cast<std::size_t>(s)];
    }

    std::string fake_verb = verb;
    while (fake_verb == verb) fake_verb = detail::pick(rng, verbs);
    std::string fake_entity = ent[0];
    while (std::find(ent.begin(), ent.end(), fake_entity) != ent.end()) {
      fake_entity = detail::pick(rng, entities);
    }
    adversarial.push_back("The " + subj + " " + fake_verb + " the " + fake_entity + " .");

    const std::string qword = rng.next_double() < 0.5 ? "What" : "Who";
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "syn-%05d", q);
    nlohmann::ordered_json qa = {
        {"id", idbuf},
        {"question", qword + " did the " + subj + " " + verb + " ?"},
        {"answers",
         nlohmann::ordered_json::array({{{"text", answer}, {"answer_start", answer_start}}})}};
    paragraphs.push_back({{"context", context}, {"qas", nlohmann::ordered_json::array({qa})}});
  }

  SyntheticOutput out;
  out.dataset = {{"version", "synthetic-1"},
                 {"data", nlohmann::ordered_json::array(
                              {{{"title", "synthetic"}, {"paragraphs", paragraphs}}})}};
  out.adversarial_distractors = std::move(adversarial);
  return out;
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw DataError(path + ": write failed");
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  for (const auto& line : lines) out << line << "\n";
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace minictx::synthetic
