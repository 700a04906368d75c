#pragma once

#include <cmath>
#include <cstdint>

namespace cupart {

// xoshiro256++ with splitmix64 seeding. Self-contained so that every stream
// (data generation, weight init, dropout, shuffling) is reproducible
// bit-for-bit from a single u64 seed, independent of the standard library's
// distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    // Derives an independent stream, e.g. one per epoch or per module.
    Rng fork(uint64_t tag) { return Rng(next() ^ (tag * 0x9e3779b97f4a7c15ULL)); }

    uint64_t next() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), n > 0. Lemire multiply-shift; bias is
    // negligible for the n used here and the mapping is deterministic.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    int uniform_int(int lo, int hi) { // inclusive range
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Normal(mean, stddev) truncated to +/- trunc_sigmas standard deviations,
    // by rejection.
    double truncated_normal(double mean, double stddev, double trunc_sigmas = 2.0) {
        double z = normal();
        while (std::abs(z) > trunc_sigmas) z = normal();
        return mean + stddev * z;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace cupart
