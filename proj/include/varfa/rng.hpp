#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace varfa {

/// Counter-based generator: the n-th draw of a stream is a pure function of
/// (key, n), so any stream can be addressed directly by a tuple of ids
/// (seed, epoch, batch, student, ...) and reproduced on any platform.
class CounterRng {
 public:
  static constexpr std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  explicit CounterRng(std::uint64_t seed) : key_(mix(seed)) {}

  CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) : key_(mix(seed)) {
    for (auto id : ids) key_ = mix(key_ ^ mix(id + 0x632BE59BD9B4E019ULL));
  }

  std::uint64_t next_u64() { return mix(key_ + 0xD1B54A32D192ED03ULL * ++counter_); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection keeps the draw unbiased.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = -n % n;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller (one output per pair of uniforms).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Exponential(1) by inverse CDF.
  double exponential() { return -std::log(uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace varfa
