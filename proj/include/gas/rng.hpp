#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gas {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a, used only to turn stream names into seed material.
constexpr std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent named stream derived from a root seed. Streams with
/// different names never share state, so an ablation that changes how one
/// stream is consumed leaves every other stream untouched.
inline Rng make_stream(std::uint64_t root_seed, std::string_view name) {
    const std::uint64_t tag = fnv1a64(name);
    std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return Rng(seq);
}

/// Uniform draw on the closed interval between two endpoints given in either
/// order; a zero-width interval returns the endpoint exactly.
inline double uniform_between(Rng& rng, double a, double b) {
    if (a > b) std::swap(a, b);
    if (a == b) return a;
    return std::uniform_real_distribution<double>(a, b)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::bernoulli_distribution(p)(rng);
}

}  // namespace gas
