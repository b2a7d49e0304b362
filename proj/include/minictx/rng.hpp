#pragma once

#include <cstdint>
#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

namespace minictx {

/// splitmix64 generator. Chosen over std::mt19937 so that every stream
/// (weight init, dropout masks, data shuffling, OOV vectors) is bit-identical
/// across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1). 53-bit mantissa, exact across platforms.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t next_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::swap(v[i], v[next_index(i + 1)]);
    }
  }

  /// Derive an independent stream; distinct tags give distinct streams.
  Rng fork(std::uint64_t tag) {
    Rng r(state_ ^ (0xA0761D6478BD642FULL * (tag + 1)));
    r.next_u64();
    return r;
  }

 private:
  std::uint64_t state_;
};

/// FNV-1a over raw bytes; used to derive deterministic per-token seeds.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace minictx
