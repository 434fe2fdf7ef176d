#ifndef CRDDME_RANDOM_HPP
#define CRDDME_RANDOM_HPP

#include <cstdint>
#include <random>

namespace crddme {

using Rng = std::mt19937_64;

/// One step of the SplitMix64 finalizer; a good 64-bit mixing function.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of stream r derived from a master seed:
///   split(master, r) = splitmix64(splitmix64(master) ^ splitmix64(r + 1)).
/// Used for ensemble realizations so each one is reproducible on its own.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t r) {
  return splitmix64(splitmix64(master) ^ splitmix64(r + 1));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1].
inline double uniform01_open0(Rng &rng) { return 1.0 - uniform01(rng); }

/// Radical inverse of i in the given base (van der Corput), in [0, 1).
inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

} // namespace crddme

#endif
