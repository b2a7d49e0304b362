#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "minictx/eval.hpp"
#include "minictx/tensor.hpp"

namespace minictx::corpus {

struct Token {
  std::string text;
  int char_start = 0;  // offset into the raw paragraph
  int char_end = 0;    // exclusive
};

/// Sentences tile the document token list: no gaps, no overlaps.
struct SentenceSpan {
  int token_start = 0;
  int token_end = 0;  // exclusive
  int index = 0;
};

/// Aligned answer span over document tokens; token_end exclusive.
struct Answer {
  int token_start = 0;
  int token_end = 0;
  std::string raw_text;
};

struct QAExample {
  std::string id;
  std::string context;  // raw paragraph; token offsets index into it
  std::vector<Token> document_tokens;
  std::vector<SentenceSpan> sentences;
  std::string question;
  std::vector<Token> question_tokens;
  std::vector<Answer> answers;             // spans that aligned to tokens
  std::vector<std::string> answer_texts;   // every gold string, aligned or not
  std::vector<int> oracle_sentence_indices;
  bool unalignable = false;       // had answers, none aligned
  bool truncated_answer = false;  // truncation removed an aligned answer
};

namespace detail {
inline bool is_split_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':':
    case '"': case '\'': case '(': case ')': case '[': case ']':
    case '{': case '}':
      return true;
    default:
      return false;
  }
}
inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}
}  // namespace detail

/// Whitespace split, then leading/trailing punctuation of the class
/// .,!?;:"'()[]{} peeled off as single-character tokens. Internal hyphens
/// and apostrophes stay attached. Offsets are exact byte offsets.
inline std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  const int n = static_cast<int>(text.size());
  int i = 0;
  while (i < n) {
    while (i < n && detail::is_space(text[i])) ++i;
    if (i >= n) break;
    int j = i;
    while (j < n && !detail::is_space(text[j])) ++j;
    int lo = i;
    while (lo < j && detail::is_split_punct(text[lo])) {
      tokens.push_back({text.substr(lo, 1), lo, lo + 1});
      ++lo;
    }
    int hi = j;
    while (hi > lo && detail::is_split_punct(text[hi - 1])) --hi;
    if (hi > lo) tokens.push_back({text.substr(lo, hi - lo), lo, hi});
    for (int t = hi; t < j; ++t) tokens.push_back({text.substr(t, 1), t, t + 1});
    i = j;
  }
  return tokens;
}

namespace detail {
inline bool is_abbreviation(const std::string& t) {
  static const std::set<std::string> kAbbrevs = {"mr", "mrs", "dr", "st",
                                                 "vs", "etc", "e.g", "i.e"};
  std::string lower;
  lower.reserve(t.size());
  for (char c : t) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return kAbbrevs.count(lower) > 0;
}
inline bool is_single_capital(const std::string& t) {
  return t.size() == 1 && t[0] >= 'A' && t[0] <= 'Z';
}
}  // namespace detail

/// Terminator tokens {. ! ?} end a sentence unless the preceding token is a
/// single capital letter (an initial) or a known abbreviation. The spans
/// tile [0, tokens.size()).
inline std::vector<SentenceSpan> split_sentences(const std::vector<Token>& tokens,
                                                 [[maybe_unused]] const std::string& raw = {}) {
  std::vector<SentenceSpan> spans;
  const int n = static_cast<int>(tokens.size());
  int start = 0;
  for (int t = 0; t < n; ++t) {
    const std::string& txt = tokens[t].text;
    const bool terminator = (txt == "." || txt == "!" || txt == "?");
    bool boundary = terminator;
    if (terminator && txt == "." && t > start) {
      const std::string& prev = tokens[t - 1].text;
      if (detail::is_single_capital(prev) || detail::is_abbreviation(prev)) boundary = false;
    }
    if (boundary) {
      spans.push_back({start, t + 1, static_cast<int>(spans.size())});
      start = t + 1;
    }
  }
  if (start < n) spans.push_back({start, n, static_cast<int>(spans.size())});
  return spans;
}

/// Indices of sentences containing at least one aligned answer span,
/// deduplicated and ascending.
inline std::vector<int> label_oracle_sentences(const QAExample& ex) {
  std::vector<int> out;
  for (const auto& s : ex.sentences) {
    for (const auto& a : ex.answers) {
      if (a.token_start >= s.token_start && a.token_end <= s.token_end) {
        out.push_back(s.index);
        break;
      }
    }
  }
  return out;
}

/// Indices of sentences whose normalized token sequence contains the
/// normalized answer tokens contiguously (distant supervision).
inline std::vector<int> align_distant(const QAExample& ex, const std::string& answer_text) {
  std::vector<int> out;
  const auto needle = eval::normalize_tokens(answer_text);
  if (needle.empty()) return out;
  for (const auto& s : ex.sentences) {
    std::vector<std::string> hay;
    for (int t = s.token_start; t < s.token_end; ++t) {
      for (auto& nt : eval::normalize_tokens(ex.document_tokens[t].text)) {
        hay.push_back(std::move(nt));
      }
    }
    if (eval::contains_subsequence(hay, needle)) out.push_back(s.index);
  }
  return out;
}

namespace detail {
/// Character span [a, b) snapped to the smallest covering token span.
/// Returns false when no token overlaps the characters.
inline bool snap_to_tokens(const std::vector<Token>& tokens, int a, int b, int* tok_start,
                           int* tok_end) {
  int first = -1, last = -1;
  for (int t = 0; t < static_cast<int>(tokens.size()); ++t) {
    if (tokens[t].char_end > a && tokens[t].char_start < b) {
      if (first < 0) first = t;
      last = t;
    }
  }
  if (first < 0) return false;
  *tok_start = first;
  *tok_end = last + 1;
  return true;
}
}  // namespace detail

inline QAExample make_example(std::string id, const std::string& context,
                              const std::string& question) {
  QAExample ex;
  ex.id = std::move(id);
  ex.context = context;
  ex.document_tokens = tokenize(context);
  ex.sentences = split_sentences(ex.document_tokens, context);
  ex.question = question;
  ex.question_tokens = tokenize(question);
  return ex;
}

/// Loads a SQuAD v1.1 JSON file: one QAExample per (paragraph, qa) pair.
/// Character-offset answers are snapped to covering token spans; answers
/// whose offsets fall outside the paragraph leave the example flagged
/// unalignable with an empty span list.
inline std::vector<QAExample> load_squad_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  std::vector<QAExample> out;
  try {
    for (const auto& article : root.at("data")) {
      for (const auto& para : article.at("paragraphs")) {
        const std::string context = para.at("context").get<std::string>();
        const auto tokens = tokenize(context);
        const auto sentences = split_sentences(tokens, context);
        for (const auto& qa : para.at("qas")) {
          QAExample ex;
          ex.id = qa.at("id").get<std::string>();
          ex.context = context;
          ex.document_tokens = tokens;
          ex.sentences = sentences;
          ex.question = qa.at("question").get<std::string>();
          ex.question_tokens = tokenize(ex.question);
          bool any_answer = false;
          for (const auto& ans : qa.at("answers")) {
            const std::string text = ans.at("text").get<std::string>();
            const int a = ans.at("answer_start").get<int>();
            const int b = a + static_cast<int>(text.size());
            ex.answer_texts.push_back(text);
            any_answer = true;
            if (a < 0 || b > static_cast<int>(context.size()) || a >= b) continue;
            int ts = 0, te = 0;
            if (detail::snap_to_tokens(tokens, a, b, &ts, &te)) {
              ex.answers.push_back({ts, te, text});
            }
          }
          ex.unalignable = any_answer && ex.answers.empty();
          ex.oracle_sentence_indices = label_oracle_sentences(ex);
          out.push_back(std::move(ex));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad SQuAD schema: " + e.what());
  }
  return out;
}

enum class InjectPosition { kAppend, kPrepend };

/// Adds one distractor sentence to the document. Original sentences, answer
/// spans and oracle labels are preserved (remapped); labels are never
/// extended to the distractor, even when it contains the answer string.
inline QAExample inject_adversarial(const QAExample& ex, const std::string& distractor_sentence,
                                    InjectPosition position) {
  const auto dtoks = tokenize(distractor_sentence);
  if (dtoks.empty()) throw DataError("distractor tokenizes to zero tokens");
  QAExample out;
  out.id = ex.id;
  out.question = ex.question;
  out.question_tokens = ex.question_tokens;
  out.answer_texts = ex.answer_texts;
  out.unalignable = ex.unalignable;
  out.truncated_answer = ex.truncated_answer;
  const int nd = static_cast<int>(dtoks.size());
  if (position == InjectPosition::kAppend) {
    out.context = ex.context + " " + distractor_sentence;
    out.document_tokens = ex.document_tokens;
    const int shift = static_cast<int>(ex.context.size()) + 1;
    for (const auto& t : dtoks) {
      out.document_tokens.push_back({t.text, t.char_start + shift, t.char_end + shift});
    }
    out.sentences = ex.sentences;
    const int base = ex.sentences.empty() ? 0 : ex.sentences.back().token_end;
    out.sentences.push_back({base, base + nd, static_cast<int>(ex.sentences.size())});
    out.answers = ex.answers;
    out.oracle_sentence_indices = ex.oracle_sentence_indices;
  } else {
    out.context = distractor_sentence + " " + ex.context;
    const int char_shift = static_cast<int>(distractor_sentence.size()) + 1;
    out.document_tokens = dtoks;
    for (const auto& t : ex.document_tokens) {
      out.document_tokens.push_back({t.text, t.char_start + char_shift, t.char_end + char_shift});
    }
    out.sentences.push_back({0, nd, 0});
    for (const auto& s : ex.sentences) {
      out.sentences.push_back({s.token_start + nd, s.token_end + nd, s.index + 1});
    }
    for (const auto& a : ex.answers) {
      out.answers.push_back({a.token_start + nd, a.token_end + nd, a.raw_text});
    }
    for (int idx : ex.oracle_sentence_indices) out.oracle_sentence_indices.push_back(idx + 1);
  }
  return out;
}

struct CorpusStats {
  int length_p90 = 0;  // smallest token count covering >= 90% of documents
};

inline CorpusStats compute_corpus_stats(const std::vector<QAExample>& examples) {
  CorpusStats st;
  if (examples.empty()) return st;
  std::vector<int> lengths;
  lengths.reserve(examples.size());
  for (const auto& ex : examples) lengths.push_back(static_cast<int>(ex.document_tokens.size()));
  std::sort(lengths.begin(), lengths.end());
  const std::size_t n = lengths.size();
  std::size_t idx = (9 * n + 9) / 10;  // ceil(0.9 n)
  if (idx > n) idx = n;
  st.length_p90 = lengths[idx == 0 ? 0 : idx - 1];
  return st;
}

/// Truncates at a sentence boundary within min(2000, max(1000, L_90)) tokens.
/// A first sentence longer than the limit is kept whole so the tiling
/// invariant survives. Aligned answers past the cut are dropped from the
/// span list and the example is flagged truncated_answer (their raw texts
/// stay in answer_texts).
inline QAExample truncate_document(const QAExample& ex, const CorpusStats& stats) {
  const int limit = std::min(2000, std::max(1000, stats.length_p90));
  if (static_cast<int>(ex.document_tokens.size()) <= limit) return ex;
  int cut = 0;
  for (const auto& s : ex.sentences) {
    if (s.token_end <= limit || s.index == 0) cut = s.token_end;
  }
  if (cut >= static_cast<int>(ex.document_tokens.size())) return ex;
  QAExample out = ex;
  out.document_tokens.assign(ex.document_tokens.begin(), ex.document_tokens.begin() + cut);
  out.sentences.clear();
  for (const auto& s : ex.sentences) {
    if (s.token_end <= cut) out.sentences.push_back(s);
  }
  out.answers.clear();
  for (const auto& a : ex.answers) {
    if (a.token_end <= cut) {
      out.answers.push_back(a);
    } else {
      out.truncated_answer = true;
    }
  }
  out.oracle_sentence_indices = label_oracle_sentences(out);
  return out;
}

/// Tokens of one sentence.
inline std::vector<Token> sentence_tokens(const QAExample& ex, int sentence_index) {
  const auto& s = ex.sentences.at(static_cast<std::size_t>(sentence_index));
  return {ex.document_tokens.begin() + s.token_start, ex.document_tokens.begin() + s.token_end};
}

/// Reads a distractor list: UTF-8 text, one sentence per line, blank lines
/// skipped.
inline std::vector<std::string> load_distractor_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (char c : line) {
      if (!detail::is_space(c)) {
        blank = false;
        break;
      }
    }
    if (!blank) out.push_back(line);
  }
  return out;
}

}  // namespace minictx::corpus
