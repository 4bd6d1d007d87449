#pragma once

#include <cstdint>
#include <random>

namespace bellsim {

/// Project-wide generator: 64-bit Mersenne Twister, seeded through SplitMix64
/// so that nearby user seeds give unrelated streams.
using Engine = std::mt19937_64;

/// One SplitMix64 output step; used as a seed mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of child stream `index` under `base`. Child streams never depend on
/// how many other children were drawn, so repetitions can be farmed out to
/// any number of workers.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

inline Engine make_engine(std::uint64_t base, std::uint64_t stream) {
  return Engine(derive_seed(base, stream));
}

}  // namespace bellsim
