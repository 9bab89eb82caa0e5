#ifndef BKT_RNG_HPP
#define BKT_RNG_HPP

#include <cstdint>
#include <random>

namespace bkt {

using Rng = std::mt19937_64;

/// Independent substream `stream` of a user seed (chains, restarts).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6b74u};
  return Rng(seq);
}

/// Uniform draw in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

}  // namespace bkt

#endif  // BKT_RNG_HPP
