// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace sfod {

/// SplitMix64 finalizer. Bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a over bytes; used to fold paths and names into stream keys.
constexpr std::uint64_t hash_bytes(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632BE59BD9B4E019ULL));
}

template <typename... Rest>
constexpr std::uint64_t derive_key(std::uint64_t seed, Rest... rest) noexcept {
  std::uint64_t k = mix64(seed);
  ((k = combine_keys(k, static_cast<std::uint64_t>(rest))), ...);
  return k;
}

/// Counter-based generator: the i-th draw of a stream is mix64(key + i * golden)
/// run through a second mix round, so any (key, counter) pair is addressable
/// and results do not depend on the standard library's distributions.
///
/// Distributions are defined here explicitly:
///   uniform()      53 high bits / 2^53, in [0, 1)
///   normal()       Box-Muller cosine branch, one uniform pair per sample
///   poisson(l)     Knuth multiplication for l <= 200, rounded normal above
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  constexpr std::uint64_t next_u64() noexcept {
    const std::uint64_t x = key_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    return mix64(mix64(x) ^ key_);
  }

  /// Independent child stream; does not advance this one.
  constexpr CounterRng fork(std::uint64_t tag) const noexcept {
    return CounterRng(combine_keys(key_, tag));
  }

  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    __extension__ using u128 = unsigned __int128;
    const u128 m = static_cast<u128>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  int uniform_int(int lo, int hi_inclusive) noexcept {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  double normal() noexcept {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  std::uint64_t poisson(double lambda) noexcept {
    if (lambda <= 0.0) return 0;
    if (lambda > 200.0) {
      double v = std::round(normal(lambda, std::sqrt(lambda)));
      return v < 0.0 ? 0 : static_cast<std::uint64_t>(v);
    }
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace sfod
