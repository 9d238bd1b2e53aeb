#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

// Deterministic random utilities. Standard-library distributions are avoided
// on purpose: their output is implementation-defined, and reproducibility
// across platforms is part of the test contract. Raw engine output is mapped
// to doubles and bounded integers by the fixed schemes below.
namespace htgl::rng {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct SplitMix64 {
    std::uint64_t state = 0;
    std::uint64_t operator()() { return splitmix64_next(state); }
};

/// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Top 53 bits -> double in [0, 1).
inline double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

template <class Gen>
double unit(Gen& g) {
    return to_unit(g());
}

/// Unbiased draw in [0, n) via mask rejection.
template <class Gen>
std::uint64_t bounded(Gen& g, std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    while (true) {
        const std::uint64_t v = g() & mask;
        if (v < n) return v;
    }
}

/// Standard normal via Box-Muller; consumes two engine outputs per value.
template <class Gen>
double gaussian(Gen& g) {
    const double u1 = 1.0 - unit(g);  // (0, 1], keeps the log finite
    const double u2 = unit(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace htgl::rng
