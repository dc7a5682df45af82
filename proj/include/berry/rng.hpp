#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace berry {

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = mix64(base);
  for (auto p : parts) h = mix64(h ^ mix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

// Thin wrapper around mt19937_64. The engine output sequence is fixed by the
// standard; the conversions below are written out so results do not depend
// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Number of failures before the first success of a Bernoulli(p) process.
  // Requires 0 < p < 1.
  std::uint64_t geometric(double p) {
    const double u = 1.0 - uniform();  // (0, 1]
    const double g = std::floor(std::log(u) / std::log1p(-p));
    if (!(g < 1.8e19)) return ~std::uint64_t{0};
    return static_cast<std::uint64_t>(g);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace berry
