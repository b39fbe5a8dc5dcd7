#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rmkit {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based standard normal stream: the i-th variate depends only on
/// (key, i), so paths can be regenerated, split or read out of order.
class CounterNormal {
 public:
  explicit CounterNormal(std::uint64_t seed) : key_(mix64(seed + 0x9E3779B97F4A7C15ULL)) {}

  /// Uniform in (0, 1), never exactly 0 or 1.
  double uniform(std::uint64_t counter) const {
    const std::uint64_t bits = mix64(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Box-Muller; variates 2j and 2j+1 share a uniform pair.
  double normal(std::uint64_t i) const {
    const std::uint64_t pair = i >> 1;
    const double r = std::sqrt(-2.0 * std::log(uniform(2 * pair)));
    const double phi = 2.0 * std::numbers::pi * uniform(2 * pair + 1);
    return (i & 1U) ? r * std::sin(phi) : r * std::cos(phi);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace rmkit
