#pragma once

#include <cstdint>
#include <random>

namespace imkit {

using Engine = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Independent generator for (seed, stream). Distinct streams never share state,
/// so work split by stream index is reproducible regardless of scheduling.
inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  const std::uint64_t a = detail::splitmix64(seed);
  const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Engine(seq);
}

inline double uniform01(Engine& eng) {
  // 53 random bits, open at both ends.
  return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(Engine& eng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

}  // namespace imkit
