#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace ctmae {

// SplitMix64 stream. All randomness in the project flows through this
// generator so that runs are reproducible bit-for-bit on any platform;
// std::normal_distribution and friends are implementation-defined and
// are deliberately avoided.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform01_open_left() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    // Box-Muller, one value per call (the sine twin is discarded to keep the
    // draw sequence a simple function of call count).
    double normal() {
        double u1 = uniform01_open_left();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Normal(0, sigma) truncated to [-2 sigma, 2 sigma] by rejection.
    double truncated_normal(double sigma) {
        for (;;) {
            double n = normal();
            if (std::fabs(n) <= 2.0) return n * sigma;
        }
    }

    // Uniform integer in [0, n). Modulo bias is < 2^-53 for any n that fits
    // the use cases here (patch counts, dataset sizes).
    uint64_t below(uint64_t n) { return next() % n; }

    bool coin() { return (next() & 1u) != 0; }

private:
    uint64_t state_;
};

// Stateless mixing of seed components into a fresh stream seed. Used to
// derive per-(iteration, item) seeds from a single run seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
    return mix_seed(mix_seed(a, b, c), d);
}

// FNV-1a, used for config hashes and name-keyed seed derivation.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a_str(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a(s.data(), s.size(), h);
}

} // namespace ctmae
