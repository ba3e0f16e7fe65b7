#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>

namespace genverify {

// SplitMix64 constants. Every randomized component in the library draws from
// CounterRng, so any implementation that reproduces these three functions
// replays identical streams.
inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kMixMul1 = 0xbf58476d1ce4e5b9ULL;
inline constexpr std::uint64_t kMixMul2 = 0x94d049bb133111ebULL;
inline constexpr std::uint64_t kDeriveInit = 0x6a09e667f3bcc909ULL;

/// SplitMix64 finalizer (bijective 64-bit mixer).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * kMixMul1;
  z = (z ^ (z >> 27)) * kMixMul2;
  return z ^ (z >> 31);
}

/// Folds a list of words into one seed:
///   h = kDeriveInit;  for v in values: h = mix64(h ^ mix64(v + kGoldenGamma))
/// Used to key per-node / per-task / per-step streams from a master seed.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> values) noexcept {
  std::uint64_t h = kDeriveInit;
  for (std::uint64_t v : values) h = mix64(h ^ mix64(v + kGoldenGamma));
  return h;
}

constexpr std::uint64_t derive_seed(std::span<const std::uint64_t> values) noexcept {
  std::uint64_t h = kDeriveInit;
  for (std::uint64_t v : values) h = mix64(h ^ mix64(v + kGoldenGamma));
  return h;
}

/// Counter-based generator: output i (0-based) of stream `key` is
///   mix64(key + (i + 1) * kGoldenGamma)
/// which is exactly the SplitMix64 sequence seeded with `key`. Any element of
/// the stream can be computed without replaying the prefix.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return at(key_, counter_++); }

  static constexpr result_type at(std::uint64_t key, std::uint64_t index) noexcept {
    return mix64(key + (index + 1) * kGoldenGamma);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) via 128-bit multiply-shift.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal via Box-Muller; consumes two outputs per call.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Seed drawn from the operating system, for streams that are meant to be
/// irreproducible (unseeded sources, emulated hardware noise).
std::uint64_t entropy_seed();

}  // namespace genverify
