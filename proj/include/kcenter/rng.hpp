#pragma once
// Seeded randomness with pinned algorithms.
//
// All draws are implemented on top of std::mt19937_64 (whose output sequence
// is fixed by the standard) with explicit transformation formulas, so a given
// seed produces the same stream on every platform and toolchain. Distribution
// objects from <random> are deliberately avoided: their algorithms are
// implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace kc {

// splitmix64 step; also used as a stable 64-bit mixer for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Stable mix of several words into one seed. Order matters.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= splitmix64(s);
    s ^= c + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return splitmix64(s);
}

// FNV-1a over a byte string; used to derive sweep seeds from grid-point values
// so that adding grid points never changes the seeds of existing ones.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Unbiased draw from {0, 1, ..., n-1} by rejection.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
        const std::uint64_t un = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % un);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller (cosine branch only; no cached state).
    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // Marsaglia-Tsang; shape < 1 handled by the boosting identity.
    double gamma(double shape) {
        if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
        if (shape < 1.0) {
            const double u = 1.0 - uniform01();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = 1.0 - uniform01();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace kc
