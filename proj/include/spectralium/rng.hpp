#pragma once

#include <cstdint>

namespace spectralium {

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, counter), so a path produces the same sequence no matter
// which thread or sub-domain advances it.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

inline double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const std::uint64_t bits = hash_combine(hash_combine(seed, stream), counter);
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace spectralium
