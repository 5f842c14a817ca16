#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace adebias {

// Deterministic RNG used throughout training, generation and resampling.
// std::mt19937_64 is bit-stable across platforms; the std:: distributions are
// not, so sampling helpers are implemented here instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire multiply-shift; bias is < 2^-64 per draw.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(eng_()) * n) >> 64);
  }

  // Uniform integer in [lo, hi] inclusive.
  long range(long lo, long hi) {
    return lo + static_cast<long>(below(static_cast<std::size_t>(hi - lo + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Derives an independent stream seed from (seed, label, index) via FNV-1a.
  static std::uint64_t derive(std::uint64_t seed, std::string_view label,
                              std::uint64_t index = 0);

 private:
  std::mt19937_64 eng_;
};

}  // namespace adebias
