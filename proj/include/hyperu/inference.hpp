#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covariance.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "simulate.hpp"
#include "tapers.hpp"

namespace hyperu {

inline constexpr std::size_t kDefaultDraws = 20000;

/// Taper family and scale count used for intervals unless the full set is requested.
inline constexpr int kReducedImax = 4;
inline constexpr std::size_t kReducedScaleCount = 25;

/// Draws of Z_R(beta) = sum_j w_j log(sum_i N(i, j)^2), N ~ N(0, Sigma_R(beta)).
struct ZSample
{
    std::vector<double> values;
    double beta = 0.0;
    double half_width = 0.0;
    std::uint64_t seed = 0;

    std::size_t count() const { return values.size(); }
};

/*! Monte Carlo sample of the pivot for a covariance matrix and scale plan.
 *
 *  Each draw is a column of mvn_sample; rows are grouped per scale in the
 *  matrix layout (scale-major).
 */
inline ZSample sample_Z(const CovBlockMatrix& m, const ScalePlan& plan, std::size_t count, std::uint64_t seed)
{
    if (count < 1)
        throw DomainError("sample_Z: count must be >= 1");
    if (m.n_scales() != plan.size())
        throw DomainError("sample_Z: covariance and scale plan disagree on the number of scales");
    const std::size_t nt = m.n_tapers();
    if (nt == 0)
        throw DomainError("sample_Z: covariance has no tapers");

    const PsdFactor f = psd_factor(m.values);
    ZSample z;
    z.beta = m.beta;
    z.half_width = m.half_width;
    z.seed = seed;
    z.values.assign(count, 0.0);
    for_each_gaussian_block(f, static_cast<Eigen::Index>(count), seed, [&](Eigen::Index first, const Eigen::MatrixXd& block) {
        for (Eigen::Index c = 0; c < block.cols(); ++c)
        {
            double acc = 0.0;
            for (std::size_t s = 0; s < plan.size(); ++s)
            {
                const double energy = block.col(c).segment(static_cast<Eigen::Index>(s * nt), static_cast<Eigen::Index>(nt)).squaredNorm();
                if (!(energy > 0.0))
                    throw ZeroTransformSum("sample_Z: Gaussian draw with zero energy at a scale");
                acc += plan.weights[s] * std::log(energy);
            }
            z.values[static_cast<std::size_t>(first + c)] = acc;
        }
    });
    return z;
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::span<const double> sample, double q)
{
    if (!(q > 0.0 && q < 1.0))
        throw DomainError("quantile: level must lie in (0, 1)");
    if (sample.empty())
        throw EmptyInput("quantile: empty sample");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(const ZSample& z, double q) { return quantile(std::span<const double>(z.values), q); }

struct ConfidenceInterval
{
    double lo = 0.0;
    double hi = 0.0;
    double level = 0.95;
    double alpha_hat = 0.0;
    double beta = 0.0;
    bool nonempty = false;
    std::size_t draws = 0;

    bool contains(double alpha) const { return lo <= alpha && alpha <= hi; }
};

/// [alpha_hat - q_{1-a/2} / log R, alpha_hat - q_{a/2} / log R] from a pivot sample.
inline ConfidenceInterval interval_from_sample(double alpha_hat, const ZSample& z, double a, double half_width)
{
    if (!(a > 0.0 && a < 1.0))
        throw DomainError("confidence interval: a must lie in (0, 1)");
    if (!(half_width > 1.0))
        throw WindowTooSmall("confidence interval: R must exceed 1");
    ConfidenceInterval ci;
    ci.level = 1.0 - a;
    ci.alpha_hat = alpha_hat;
    ci.beta = z.beta;
    ci.nonempty = true;
    ci.draws = z.count();
    const double log_r = std::log(half_width);
    ci.lo = alpha_hat - quantile(z, 1.0 - a / 2.0) / log_r;
    ci.hi = alpha_hat - quantile(z, a / 2.0) / log_r;
    if (!(ci.lo <= alpha_hat && alpha_hat <= ci.hi))
        warn("confidence interval [" + std::to_string(ci.lo) + ", " + std::to_string(ci.hi) +
             "] does not contain the estimate " + std::to_string(alpha_hat));
    return ci;
}

/*! Interval for a report with a caller-chosen beta (e.g. the true exponent
 *  in simulation studies). The set and plan must be those of the report.
 */
inline ConfidenceInterval confidence_interval_at(const EstimateReport& report, const TaperSet& set, double a,
                                                 double beta, std::size_t count = kDefaultDraws, std::uint64_t seed = 0)
{
    if (!(a > 0.0 && a < 1.0))
        throw DomainError("confidence_interval: a must lie in (0, 1)");
    if (!report.nonempty)
    {
        ConfidenceInterval ci;
        ci.level = 1.0 - a;
        return ci;
    }
    if (report.n_tapers != set.size())
        throw DomainError("confidence_interval: report was computed with a different taper set");
    const auto m = sigma_transient(set, report.plan.scales, beta, report.half_width);
    const auto z = sample_Z(m, report.plan, count, seed);
    return interval_from_sample(report.alpha_hat, z, a, report.half_width);
}

/// Interval at beta = max(alpha_hat, 0); all zero for an empty pattern.
inline ConfidenceInterval confidence_interval(const EstimateReport& report, const TaperSet& set, double a,
                                              std::size_t count = kDefaultDraws, std::uint64_t seed = 0)
{
    return confidence_interval_at(report, set, a, std::max(report.alpha_hat, 0.0), count, seed);
}

// ---------------------------------------------------------------------------
// Interval presets and coverage studies
// ---------------------------------------------------------------------------

/*! Taper family and scale count on which intervals are computed.
 *
 *  The full 75-taper, 50-scale family gives a 3750-dimensional Gaussian;
 *  by default intervals use i_max = 4 (12 tapers) and 25 scales instead.
 */
struct IntervalOptions
{
    double a = 0.05;
    std::size_t draws = kDefaultDraws;
    std::uint64_t seed = 0;
    bool full = false;
    int reduced_i_max = kReducedImax;
    std::size_t reduced_scales = kReducedScaleCount;
};

inline TaperPreset interval_preset(const TaperPreset& base, const IntervalOptions& opt)
{
    TaperPreset p = base;
    if (!opt.full)
        p.i_max = std::min(base.i_max, opt.reduced_i_max);
    return p;
}

struct PatternInterval
{
    EstimateReport basis; ///< estimate on the interval's taper family and scales
    ConfidenceInterval ci;
};

/*! Interval for a raw pattern whose main estimate is `main`.
 *
 *  The pattern is re-estimated on the interval family over the same
 *  [j_min, j_max], and the interval is centred on that estimate.
 */
inline PatternInterval interval_for_pattern(const PointPattern& raw, const EstimateReport& main,
                                            const TaperPreset& base, const IntervalOptions& opt,
                                            std::optional<double> beta = std::nullopt)
{
    PatternInterval out;
    if (raw.empty() || !main.nonempty)
    {
        out.ci.level = 1.0 - opt.a;
        return out;
    }
    if (opt.full)
        warn("confidence interval on the full taper family: " + std::to_string(main.n_tapers * main.plan.size()) +
             "-dimensional Gaussian, this may take a while");
    const TaperSet set = build_taper_set(interval_preset(base, opt));
    const std::size_t n_scales = opt.full ? main.plan.size() : opt.reduced_scales;
    const ScalePlan plan = default_scale_plan(main.j_min, main.j_max, n_scales);
    const auto normalized = normalize_intensity(raw).first;
    out.basis = estimate_alpha(normalized, set, plan);
    out.basis.lambda_hat = main.lambda_hat;
    const double b = beta ? *beta : std::max(out.basis.alpha_hat, 0.0);
    out.ci = confidence_interval_at(out.basis, set, opt.a, b, opt.draws, opt.seed);
    return out;
}

struct CoverageResult
{
    std::size_t replicates = 0;
    std::size_t covered = 0;
    double true_alpha = 0.0;
    std::vector<double> estimates;
    std::vector<ConfidenceInterval> intervals;

    double rate() const { return replicates ? static_cast<double>(covered) / static_cast<double>(replicates) : 0.0; }
};

/*! Fraction of simulated patterns whose interval covers true_alpha.
 *
 *  Each replicate is simulated from `spec` with its own substream seed,
 *  estimated with the main family to fix [j_min, j_max], then passed
 *  through interval_for_pattern exactly as a single pattern would be, with
 *  beta fixed to true_alpha so Sigma_R does not depend on the estimate.
 *  Calibrating the range on the smaller interval family instead puts j_max
 *  into the border zone and makes the intervals undercover.
 */
inline CoverageResult coverage_study(const SimSpec& spec, double true_alpha, std::size_t replicates,
                                     const TaperPreset& base, const IntervalOptions& opt,
                                     const EstimatorConfig& cfg = {})
{
    if (replicates < 1)
        throw DomainError("coverage_study: need at least one replicate");
    const TaperSet main_set = build_taper_set(base);

    CoverageResult res;
    res.replicates = replicates;
    res.true_alpha = true_alpha;
    res.estimates.resize(replicates);
    res.intervals.resize(replicates);
    std::vector<char> hit(replicates, 0);
    parallel_for(replicates, [&](std::size_t r) {
        SimSpec s = spec;
        s.seed = Rng(spec.seed, r + 1).next_u64();
        const PointPattern p = simulate(s);
        const EstimateReport main = estimate_pattern(p, main_set, cfg);
        IntervalOptions o = opt;
        o.seed = s.seed;
        const PatternInterval pi = interval_for_pattern(p, main, base, o, true_alpha);
        res.estimates[r] = pi.basis.alpha_hat;
        res.intervals[r] = pi.ci;
        hit[r] = pi.ci.nonempty && pi.ci.contains(true_alpha);
    });
    res.covered = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
    return res;
}

} // namespace hyperu
