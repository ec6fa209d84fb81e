#pragma once

#include <cstdint>
#include <random>

namespace fedsim {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream derived from (master seed, stream tag, substream tag).
// Determinism must never depend on thread schedule, so every consumer gets
// its own stream keyed by stable identifiers (round index, client id, ...).
inline Rng make_stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return Rng(mix64(master ^ mix64(a ^ mix64(b))));
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
    return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

}  // namespace fedsim
