#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace trajod {

/// FNV-1a over bytes; used to derive rng stream ids from strings.
inline uint64_t fnv1a(std::string_view s, uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h = 1469598103934665603ull) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
    }
    return h;
}

/// Deterministic counter-free PRNG (splitmix64 core). Identical sequences
/// for identical (seed, stream) on any platform; no libc/libstdc++
/// distribution machinery involved.
class SeededRng {
public:
    SeededRng(uint64_t seed, uint64_t stream) {
        state_ = mix(mix(0x9e3779b97f4a7c15ull ^ seed) + stream);
        // burn a little so nearby (seed, stream) pairs decorrelate
        next_u64();
        next_u64();
    }
    SeededRng(uint64_t seed, std::string_view stream) : SeededRng(seed, fnv1a(stream)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (two uniforms per draw, no caching).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    /// Uniform integer in [0, n), rejection sampled (no modulo bias).
    int64_t choice(int64_t n) {
        if (n <= 1) return 0;
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return static_cast<int64_t>(v % un);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (int64_t i = static_cast<int64_t>(xs.size()) - 1; i > 0; --i) {
            int64_t j = choice(i + 1);
            std::swap(xs[static_cast<size_t>(i)], xs[static_cast<size_t>(j)]);
        }
    }

    /// k distinct indices from [0, n), order of first appearance in a shuffle.
    std::vector<int> sample_indices(int n, int k) {
        std::vector<int> idx(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
        shuffle(idx);
        if (k < n) idx.resize(static_cast<size_t>(k));
        return idx;
    }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t state_;
};

}  // namespace trajod
