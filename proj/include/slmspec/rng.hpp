#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace slmspec::rng {

// Counter-based generator. Every draw is a pure function of
// (key, counter), so results never depend on thread scheduling or on
// the order in which pixels are visited.
//
//   mix(z):  z += 0x9e3779b97f4a7c15
//            z  = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//            z  = (z ^ (z >> 27)) * 0x94d049bb133111eb
//            z ^= z >> 31
//
// This is the SplitMix64 finalizer. Keys are derived by chaining mix()
// over the seed and the stream coordinates (frame, pixel, draw).

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a) noexcept {
  return mix(seed ^ mix(a + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return derive(derive(seed, a), b);
}

/// Uniform double in (0, 1) from the top 53 bits; never returns 0 or 1.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// A stream of draws at a fixed key: draw i is mix(key + i).
class Stream {
 public:
  constexpr explicit Stream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t next_bits() noexcept { return mix(key_ + 0xd1b54a32d192ed03ULL * ++counter_); }
  constexpr double uniform() noexcept { return to_unit(next_bits()); }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n) by multiply-shift (n < 2^32).
  std::uint32_t below(std::uint32_t n) noexcept {
    return static_cast<std::uint32_t>(((next_bits() >> 32) * static_cast<std::uint64_t>(n)) >> 32);
  }

  /// Standard normal by Box-Muller (cosine branch only, two draws per sample).
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace slmspec::rng
