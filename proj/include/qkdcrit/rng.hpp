#pragma once

// Deterministic, seedable RNG with stable cross-platform output.
// xoshiro256** (Blackman & Vigna) seeded through splitmix64, so any 64-bit
// seed (including 0) yields a well-mixed state.  std::mt19937 is avoided on
// purpose: distribution adapters in libstdc++/libc++ differ, and reproducible
// transcripts are part of the contract here.

#include <cmath>
#include <cstdint>

namespace qkdcrit {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
    have_spare_ = false;
    spare_ = 0.0;
  }

  /// Independent stream derived from (seed, index); used for per-trial and
  /// per-worker RNGs so results do not depend on scheduling.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t sm = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    return Rng(splitmix64(sm));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 significant bits.
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  /// Bernoulli(p) draw.
  bool bernoulli(double p) { return uniform() < p; }

  int bit() { return static_cast<int>(next_u64() >> 63); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free is not needed here; modulo bias is < 2^-32 for the
    // small n used in this codebase, but take the cheap unbiased route.
    if (n == 0) return 0;
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller (polar form avoided to keep the draw
  /// count per call fixed at known parity).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  bool have_spare_;
  double spare_;
};

}  // namespace qkdcrit
