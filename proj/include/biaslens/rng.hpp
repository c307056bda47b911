#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace biaslens {

// SplitMix64 (Steele, Lea & Flood 2014; Vigna's fixed-increment variant).
// Chosen as the single PRNG for the whole toolkit because its output is
// identical on every platform, which makes permutations, weight init and
// synthetic datasets reproducible bit-for-bit.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform in [0, n). n must be > 0. Modulo mapping: the tiny bias is
    // irrelevant here and the mapping stays identical across languages.
    uint64_t next_below(uint64_t n) {
        return next_u64() % n;
    }

    // Standard normal via Box-Muller (one value per call, cached pair).
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// In-place Fisher-Yates driven by a SplitMix64 stream. The resulting
// permutation depends only on (v.size(), rng state at entry).
template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, SplitMix64& rng) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
        const size_t j = static_cast<size_t>(rng.next_below(i + 1));
        std::swap(v[i], v[j]);
    }
}

inline std::vector<uint32_t> random_permutation(size_t n, uint64_t seed) {
    std::vector<uint32_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = static_cast<uint32_t>(i);
    SplitMix64 rng(seed);
    fisher_yates_shuffle(perm, rng);
    return perm;
}

// FNV-1a 64-bit. Used as the stable per-path hash that diversifies
// per-image scramble seeds; must never change across versions.
inline uint64_t fnv1a_hash(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : s) {
        h ^= static_cast<uint8_t>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace biaslens
