#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

#include "pgpois/errors.hpp"

namespace pgpois {

/// SplitMix64 step. Used for seeding and for hashing stream identifiers.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** 1.0, seeded through SplitMix64. The generator is pinned so that
/// draws (and any golden files built from them) are identical on every platform.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    bool operator==(const Xoshiro256&) const = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
};

using Rng = Xoshiro256;

/// Seed for an independent stream identified by (seed, ids...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t state = seed;
    std::uint64_t h = splitmix64(state);
    for (std::uint64_t id : ids) {
        state = h ^ (id + 0x632BE59BD9B4E019ULL);
        h = splitmix64(state);
    }
    return h;
}

/// Uniform on the open interval (0, 1) with 53 bits of resolution.
template <typename Gen>
double sample_uniform(Gen& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal by Box-Muller; one value per call so the stream position
/// depends only on the number of draws.
template <typename Gen>
double sample_normal(Gen& rng) {
    const double u1 = sample_uniform(rng);
    const double u2 = sample_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename Gen>
Eigen::VectorXd sample_normal_vector(Eigen::Index size, Gen& rng) {
    Eigen::VectorXd z(size);
    for (Eigen::Index i = 0; i < size; ++i) z[i] = sample_normal(rng);
    return z;
}

/// Gamma(shape, scale) by Marsaglia-Tsang, with the u^(1/shape) boost for shape < 1.
template <typename Gen>
double sample_gamma(double shape, double scale, Gen& rng) {
    if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale))
        throw ArgumentError("sample_gamma: shape and scale must be positive and finite");
    if (shape < 1.0) {
        const double boost = std::pow(sample_uniform(rng), 1.0 / shape);
        return sample_gamma(shape + 1.0, scale, rng) * boost;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = sample_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = sample_uniform(rng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

/// InvGamma(shape, scale): density proportional to x^(-shape-1) exp(-scale/x).
template <typename Gen>
double sample_invgamma(double shape, double scale, Gen& rng) {
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw ArgumentError("sample_invgamma: scale must be positive and finite");
    return scale / sample_gamma(shape, 1.0, rng);
}

/// Standard half-Cauchy C+(0, 1).
template <typename Gen>
double sample_halfcauchy(Gen& rng) {
    return std::abs(std::tan(std::numbers::pi * (sample_uniform(rng) - 0.5)));
}

/// Poisson(mean): sequential inversion below 30, Hormann's PTRS above.
template <typename Gen>
std::int64_t sample_poisson(double mean, Gen& rng) {
    if (!(mean > 0.0) || !std::isfinite(mean))
        throw ArgumentError("sample_poisson: mean must be positive and finite");
    if (mean < 30.0) {
        const double u = sample_uniform(rng);
        double pmf = std::exp(-mean);
        double cdf = pmf;
        std::int64_t k = 0;
        while (u > cdf) {
            ++k;
            pmf *= mean / static_cast<double>(k);
            cdf += pmf;
            if (pmf < 1e-300 && k > mean) break;
        }
        return k;
    }
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = sample_uniform(rng) - 0.5;
        const double v = sample_uniform(rng);
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0))
            return static_cast<std::int64_t>(k);
    }
}

}  // namespace pgpois
