#pragma once

// Seeded random streams with fully specified output.
//
// The standard distributions and std::shuffle are implementation-defined, so
// draws here are built directly on the 64-bit Mersenne Twister, whose output
// sequence the standard does fix. Independent streams are derived from a
// base seed and a list of indices (replicate, column, ...).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "catdcor/error.hpp"

namespace catdcor {

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * (stream.size() + 1));
    auto push = [&](std::uint64_t v) {
      words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto s : stream) push(s);
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by rejection, no modulo bias.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) fail(ErrorCode::invalid_argument, "empty integer range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % bound;
  }

  /// Standard normal by the polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  template <class T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Inverse-CDF draws from a fixed discrete distribution.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> probabilities) {
    if (probabilities.empty()) fail(ErrorCode::invalid_argument, "no categories to sample");
    double total = 0.0;
    cumulative_.reserve(probabilities.size());
    for (double p : probabilities) {
      if (!(p >= 0.0)) fail(ErrorCode::invalid_argument, "negative sampling probability");
      total += p;
      cumulative_.push_back(total);
    }
    if (!(total > 0.0)) fail(ErrorCode::invalid_argument, "sampling probabilities sum to zero");
    for (double& c : cumulative_) c /= total;
    cumulative_.back() = 1.0;
  }

  int operator()(Rng& rng) const {
    const double u = rng.uniform();
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (u < cumulative_[mid]) hi = mid; else lo = mid + 1;
    }
    return static_cast<int>(lo);
  }

  std::size_t size() const noexcept { return cumulative_.size(); }

 private:
  std::vector<double> cumulative_;
};

}  // namespace catdcor
