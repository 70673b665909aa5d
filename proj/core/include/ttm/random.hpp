#pragma once

#include <cstdint>
#include <string_view>

namespace ttm {

/// 64-bit FNV-1a. Stable across platforms; used for token seeds and state hashes.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and a stream index.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t s = base ^ (stream * 0xd1b54a32d192ed03ULL);
  return splitmix64(s);
}

/// Small counter-based generator. Unlike the <random> distributions, the
/// conversions here are fully specified, so sequences match on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept { return splitmix64(state_); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept { return next_u64() % n; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Approximately standard normal: Irwin-Hall sum of 12 uniforms. Pure
  /// IEEE arithmetic, so results are bit-identical across libm versions.
  double gaussian() noexcept {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += uniform();
    return s - 6.0;
  }

  [[nodiscard]] std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace ttm
