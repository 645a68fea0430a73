#pragma once

#include <cstdint>

namespace physr {

// Deterministic splitmix64 generator. Self-contained so that seeded runs are
// bit-identical across standard libraries and platforms.
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 random bits.
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0. Modulo bias is negligible for
    // the small n used here (shuffles, index picks).
    uint64_t below(uint64_t n) { return next() % n; }

    // Derive an independent stream (e.g. one per sample) from this seed.
    static uint64_t spawn(uint64_t seed, uint64_t stream) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
        return r.next();
    }
};

// Fisher-Yates shuffle with the deterministic generator above.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = size_t(rng.below(i));
        auto tmp = v[i - 1];
        v[i - 1] = v[j];
        v[j] = tmp;
    }
}

} // namespace physr
