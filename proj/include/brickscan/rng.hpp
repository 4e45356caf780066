#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace brickscan {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output function.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Child seed for item `index` of a parent stream. Used for per-brick,
/// per-sample, per-pixel and per-stage seeds so results never depend on
/// evaluation order.
inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix64(parent + kGolden * (mix64(index + 0x632BE59BD9B4E019ULL) | 1ULL));
}

/// Counter-based generator: draw n is mix64(key + n * golden), i.e. a
/// SplitMix64 stream addressed by counter.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + kGolden * ++counter_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Standard normal via Box-Muller (cosine branch only).
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace brickscan
