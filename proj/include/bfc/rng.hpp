#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "bfc/units.hpp"

// Self-contained deterministic RNG stack. The seeded-stream contract requires
// bit-identical output across platforms and toolchains, which rules out the
// standard-library distributions (their draw sequences are implementation
// defined); the generators below are fixed algorithms with fixed draw orders.

namespace bfc::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stable substream derivation: (seed, stream tag, counter) -> child seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::uint64_t st = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  const std::uint64_t z = splitmix64(st);
  st ^= index * 0xBF58476D1CE4E5B9ull + z;
  return splitmix64(st);
}

// xoshiro256** (Blackman & Vigna, public domain), seeded through splitmix64.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; used where log() must stay finite.
  double uniform_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  // Exponential interarrival with the given rate (rate > 0).
  double exponential(double rate_hz) { return -std::log(uniform_pos()) / rate_hz; }

  // Box-Muller; always consumes exactly two uniforms.
  double gaussian() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Knuth product method, chunked so exp(-lambda) never underflows. Exact.
  long poisson(double lambda) {
    long total = 0;
    while (lambda > 500.0) {
      total += poisson_knuth(500.0);
      lambda -= 500.0;
    }
    return total + poisson_knuth(lambda);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  long poisson_knuth(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::array<std::uint64_t, 4> state_{};
};

// Stream tags for substream derivation (part of the seed contract).
inline constexpr std::uint64_t kStreamPairs = 1;
inline constexpr std::uint64_t kStreamDarksSignal = 2;
inline constexpr std::uint64_t kStreamDarksIdler = 3;
inline constexpr std::uint64_t kStreamSplit = 4;
inline constexpr std::uint64_t kStreamLoss = 5;
inline constexpr std::uint64_t kStreamFringe = 6;
inline constexpr std::uint64_t kStreamScan = 7;

}  // namespace bfc::rng
