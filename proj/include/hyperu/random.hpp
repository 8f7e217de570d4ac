#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace hyperu {

/*! Seedable random stream with a fixed, portable algorithm.
 *
 *  Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
 *  Seeding: (seed, stream) is mixed through SplitMix64 so independent streams
 *  can be derived for parallel blocks. Variates are produced by the routines
 *  below, not by std:: distributions, whose algorithms are implementation
 *  defined. Changing any of this must bump kVersion.
 */
class Rng
{
public:
    static constexpr const char* kVersion = "mt19937_64/splitmix64/v1";

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : m_engine(mix(seed, stream)) {}

    /// Independent child stream; deterministic in (parent seed, stream id).
    static Rng substream(std::uint64_t seed, std::uint64_t stream) { return Rng(seed, stream + 1); }

    std::uint64_t next_u64() { return m_engine(); }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    double uniform()
    {
        return (static_cast<double>(m_engine() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential() { return -std::log(uniform()); }

    /// Standard normal by Box-Muller; the second variate of each pair is cached.
    double normal()
    {
        if (m_has_spare)
        {
            m_has_spare = false;
            return m_spare;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        m_spare = r * std::sin(theta);
        m_has_spare = true;
        return r * std::cos(theta);
    }

    /// Poisson count: inversion for small means, Hormann's PTRS otherwise.
    std::uint64_t poisson(double mean)
    {
        if (!(mean > 0.0))
            return 0;
        if (mean < 10.0)
        {
            const double limit = std::exp(-mean);
            double prod = uniform();
            std::uint64_t k = 0;
            while (prod > limit)
            {
                prod *= uniform();
                ++k;
            }
            return k;
        }
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;)
        {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::abs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr)
                return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us))
                continue;
            if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
                -mean + k * loglam - std::lgamma(k + 1.0))
                return static_cast<std::uint64_t>(k);
        }
    }

private:
    static std::uint64_t splitmix(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream)
    {
        return splitmix(splitmix(seed) ^ splitmix(stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
    }

    std::mt19937_64 m_engine;
    double m_spare = 0.0;
    bool m_has_spare = false;
};

} // namespace hyperu
