#pragma once
#include <cstdint>
#include <random>

namespace qdt {

// splitmix64; used to derive independent child seeds from a master seed.
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    return mix_seed(mix_seed(mix_seed(master ^ mix_seed(a)) ^ mix_seed(b)) ^ mix_seed(c));
}

using Rng = std::mt19937_64;

}  // namespace qdt
