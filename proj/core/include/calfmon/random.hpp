#pragma once

#include <cstdint>
#include <random>

namespace calfmon {

/// Seedable generator with platform-independent output.
///
/// The engine is `std::mt19937_64`, whose sequence is fixed by the standard.
/// The standard distributions are implementation-defined, so every variate is
/// derived here from raw 64-bit draws:
///   - uniform():   one draw, top 53 bits, in [0, 1)
///   - uniform_int: rejection sampling on raw draws, unbiased
///   - normal():    Box-Muller, consumes exactly two uniform() draws
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). `n` must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix_seed(mix_seed(parent) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

}  // namespace calfmon
