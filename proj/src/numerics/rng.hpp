#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace clinbench::numerics {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632BE59BD9B4E019ULL));
}

/// Counter-based generator: the i-th draw is a pure function of (key, i).
/// There is no hidden global state; two generators with the same key yield
/// the same stream, and `fork` derives independent child streams.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(mix64(key)), counter_(counter) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  CounterRng fork(std::uint64_t stream) const noexcept {
    CounterRng child(0);
    child.key_ = combine_keys(key_, stream);
    return child;
  }

  void skip(std::uint64_t n) noexcept { counter_ += n; }

  std::uint64_t next_u64() noexcept { return at(counter_++); }

  /// Draw at an absolute position without advancing.
  std::uint64_t at(std::uint64_t index) const noexcept { return combine_keys(key_, index); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return to_unit(next_u64()); }

  static double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n) via rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal via Box-Muller (one value per two uniforms).
  double normal() noexcept {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) noexcept {
    double u = uniform();
    return -std::log1p(-u) / rate;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace clinbench::numerics
