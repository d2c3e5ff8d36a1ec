#pragma once

#include <cstdint>
#include <random>

namespace dgbf {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Random stream used for every stochastic step. The engine is fully specified
// by the standard; index draws go through `below` so results do not depend on
// the library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Deterministic stream keyed by (seed, layer, tree). Independent of the order
// in which streams are requested, so parallel schedules see identical draws.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t layer, std::uint64_t tree) {
  std::uint64_t key = mix64(seed);
  key = mix64(key ^ (layer * 0xd1b54a32d192ed03ULL));
  key = mix64(key ^ (tree * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
  return Rng(key);
}

}  // namespace dgbf
