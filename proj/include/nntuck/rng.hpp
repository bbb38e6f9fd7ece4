#pragma once

// Counter-based random streams built on the SplitMix64 output function.
//
// Every stream is a pure function of (key, counter):
//
//   out_n  = mix64(key + (n + 1) * 0x9E3779B97F4A7C15)
//   mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//             z ^= z >> 27; z *= 0x94D049BB133111EB;
//             z ^= z >> 31;
//
// Sub-streams are derived with derive(seed, i) = mix64(seed + (i+1)*golden),
// so any consumer (a restart, a fold, a tensor entry) can be reproduced in
// isolation from the master seed. The scheme has no hidden state and is
// straightforward to reimplement in other languages.

#include <cmath>
#include <cstdint>

namespace nntuck::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

/// Keyed sub-stream `index` of `seed`.
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed + (index + 1) * kGolden);
}

class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform on the open interval (0, 1); never returns an endpoint.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline Stream stream(std::uint64_t seed) { return Stream(mix64(seed)); }

/// Independent sub-stream keyed by a tensor entry (i, j, k).
inline Stream entry_stream(std::uint64_t seed, int i, int j, int k) {
  return Stream(derive(derive(derive(seed, static_cast<std::uint64_t>(i)),
                              static_cast<std::uint64_t>(j)),
                       static_cast<std::uint64_t>(k)));
}

/// Poisson draw by CDF inversion with a single uniform. Exact for the rates
/// this project works with (well below ~700, where exp(-rate) underflows).
inline long sample_poisson(Stream& s, double rate) {
  if (rate <= 0.0) return 0;
  const double u = s.next_unit();
  double pmf = std::exp(-rate);
  double cdf = pmf;
  long k = 0;
  const long cap = static_cast<long>(rate + 30.0 * std::sqrt(rate + 1.0) + 100.0);
  while (u > cdf && k < cap) {
    ++k;
    pmf *= rate / static_cast<double>(k);
    cdf += pmf;
  }
  return k;
}

}  // namespace nntuck::rng
