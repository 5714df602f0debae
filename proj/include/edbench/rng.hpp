#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace edbench {

// Stateless 64-bit mixer, used to derive independent seeds for sub-streams
// (per-case, per-cell) so that scheduling order never affects results.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 0x51ed2701u));
}

// Deterministic RNG wrapper. std::mt19937_64 has a standard-specified
// sequence, but the std distributions do not, so sampling is done here
// with fixed arithmetic only.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        // multiply-shift reduction with rejection of the biased band
        for (;;) {
            uint64_t x = engine_();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            auto lo = static_cast<uint64_t>(m);
            if (lo >= n || lo >= (0ull - n) % n) return static_cast<uint64_t>(m >> 64);
        }
    }

    // Approximate standard normal: sum of 12 uniforms minus 6. Uses only
    // IEEE additions of dyadic rationals, so results are bit-identical on
    // every conforming platform (no libm involved). Plenty for weight init.
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform();
        return s - 6.0;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// FNV-1a over raw bytes; used for content hashes in run manifests and
// cache keys. Not cryptographic.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace edbench
