#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace invsel {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream splitting: the seed of a sub-stream is obtained by folding each
/// counter into the master seed through SplitMix64,
///   s_0 = splitmix64(master),  s_{i+1} = splitmix64(s_i ^ c_i).
/// Distinct counter tuples give statistically independent streams, and the
/// result does not depend on which worker evaluates it.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters) noexcept {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t c : counters) s = splitmix64(s ^ c);
  return s;
}

}  // namespace invsel
