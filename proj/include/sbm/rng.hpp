#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sbm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a sequence of counters
/// (e.g. grid point index, trial index).
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> counters) {
    std::uint64_t h = splitmix64(parent);
    for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

} // namespace sbm
