#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace poplim::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based stream split: (master seed, replicate index) -> generator.
/// Replicates can be produced in any order and always see the same stream.
inline std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master ^ (index + 1) * 0xD1342543DE82EF95ULL;
  std::uint64_t seed = splitmix64(s) ^ splitmix64(s);
  return std::mt19937_64(seed);
}

/// Uniform on the open interval (0,1); never 0 or 1.
inline double uniform01(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

/// Exponential holding time at the given positive rate; strictly positive.
inline double exponential(std::mt19937_64& g, double rate) {
  return -std::log(uniform01(g)) / rate;
}

}  // namespace poplim::rng
