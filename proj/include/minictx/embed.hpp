#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "minictx/corpus.hpp"
#include "minictx/rng.hpp"
#include "minictx/tensor.hpp"

namespace minictx::embed {

/// Immutable token -> vector table. Lookups try the lowercased form first,
/// then the raw form; misses fall back to a deterministic hashed vector so
/// distinct out-of-vocabulary words stay distinguishable.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, std::uint64_t oov_seed) : dim_(dim), oov_seed_(oov_seed) {
    if (dim <= 0) throw ConfigError("embedding dimension must be positive");
  }

  int dim() const { return dim_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::uint64_t oov_seed() const { return oov_seed_; }

  void insert(const std::string& token, Vec v) {
    vocab_.emplace(token, std::move(v));  // first entry wins on duplicates
  }

  const Vec* find(const std::string& token) const {
    std::string lower;
    lower.reserve(token.size());
    for (char c : token) {
      lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    auto it = vocab_.find(lower);
    if (it != vocab_.end()) return &it->second;
    if (lower != token) {
      it = vocab_.find(token);
      if (it != vocab_.end()) return &it->second;
    }
    return nullptr;
  }

  /// Components uniform in [-0.5, 0.5] from splitmix64 seeded with
  /// oov_seed ^ fnv1a64(token): reproducible across runs and platforms.
  Vec oov_vector(const std::string& token) const {
    Rng rng(oov_seed_ ^ fnv1a64(token));
    Vec v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = rng.next_double() - 0.5;
    return v;
  }

  Vec lookup(const std::string& token) const {
    const Vec* v = find(token);
    return v ? *v : oov_vector(token);
  }

 private:
  int dim_;
  std::uint64_t oov_seed_;
  std::unordered_map<std::string, Vec> vocab_;
};

/// Parses a GloVe-style text file: "token f1 f2 ... f_dim" per line.
/// expected_dim 0 takes the first line's dimension. A line whose float
/// count disagrees raises a DataError naming the line number.
inline EmbeddingTable load_embedding_file(const std::string& path, int expected_dim,
                                          std::uint64_t oov_seed = 0) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  std::string line;
  int dim = expected_dim;
  std::vector<std::pair<std::string, Vec>> entries;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": no vector values");
    }
    const std::string token = line.substr(0, sp);
    std::vector<double> vals;
    std::size_t pos = sp + 1;
    while (pos < line.size()) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (pos >= line.size()) break;
      std::size_t end = line.find(' ', pos);
      if (end == std::string::npos) end = line.size();
      double v = 0.0;
      const auto res = std::from_chars(line.data() + pos, line.data() + end, v);
      if (res.ec != std::errc{} || res.ptr != line.data() + end) {
        throw DataError(path + ": line " + std::to_string(line_no) + ": bad float");
      }
      vals.push_back(v);
      pos = end;
    }
    if (dim == 0) dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != dim) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(dim) + " values, got " + std::to_string(vals.size()));
    }
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = vals[static_cast<std::size_t>(i)];
    entries.emplace_back(token, std::move(v));
  }
  if (dim == 0) throw DataError(path + ": empty embedding file and no expected dimension");
  EmbeddingTable table(dim, oov_seed);
  for (auto& [tok, v] : entries) table.insert(tok, std::move(v));
  return table;
}

/// Column i holds the vector for tokens[i]; shape dim x L.
inline Mat embed_tokens(const EmbeddingTable& table, const std::vector<corpus::Token>& tokens) {
  Mat out(table.dim(), static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = table.lookup(tokens[i].text);
  }
  return out;
}

}  // namespace minictx::embed
