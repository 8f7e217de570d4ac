#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "geometry.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "simulate.hpp"
#include "tapers.hpp"
#include "transforms.hpp"

namespace hyperu {

/// Scales J and regression weights with sum w = 0 and sum j w = 1.
struct ScalePlan
{
    std::vector<double> scales;
    std::vector<double> weights;

    std::size_t size() const { return scales.size(); }
    double sum_weights() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
    double sum_scaled_weights() const
    {
        double s = 0.0;
        for (std::size_t k = 0; k < scales.size(); ++k)
            s += scales[k] * weights[k];
        return s;
    }
    double sum_squared_weights() const
    {
        return std::inner_product(weights.begin(), weights.end(), weights.begin(), 0.0);
    }
};

/*! Least-squares slope weights w_j = (|J| j - sum j') / (|J| sum j'^2 - (sum j')^2).
 *
 *  Evaluated in the centred form (j - mean) / sum (j' - mean)^2, which is
 *  algebraically identical and keeps both constraints at rounding level.
 */
inline ScalePlan least_squares_weights(std::span<const double> scales)
{
    if (scales.size() < 2)
        throw DegenerateScales("least_squares_weights: at least two scales are required");
    const double n = static_cast<double>(scales.size());
    const double mean = std::accumulate(scales.begin(), scales.end(), 0.0) / n;
    double ss = 0.0;
    for (double j : scales)
        ss += (j - mean) * (j - mean);
    if (!(ss > 0.0))
        throw DegenerateScales("least_squares_weights: scales have zero variance");

    ScalePlan plan;
    plan.scales.assign(scales.begin(), scales.end());
    plan.weights.reserve(scales.size());
    for (double j : scales)
        plan.weights.push_back((j - mean) / ss);
    return plan;
}

inline constexpr std::size_t kDefaultScaleCount = 50;

/// count uniform scales on [j_min, j_max], endpoints included.
inline ScalePlan default_scale_plan(double j_min, double j_max, std::size_t count = kDefaultScaleCount)
{
    if (!(j_min > 0.0) || !(j_max > j_min))
        throw DomainError("default_scale_plan: need 0 < j_min < j_max");
    if (count < 2)
        throw DegenerateScales("default_scale_plan: at least two scales are required");
    std::vector<double> scales(count);
    for (std::size_t k = 0; k < count; ++k)
        scales[k] = j_min + (j_max - j_min) * static_cast<double>(k) / static_cast<double>(count - 1);
    scales.back() = j_max;
    return least_squares_weights(scales);
}

/// d - sum_j w_j C(j), with C(j) = log(energy_j) / log R.
inline double alpha_from_curve_values(int dim, const ScalePlan& plan, std::span<const double> curve_values)
{
    double slope = 0.0;
    for (std::size_t k = 0; k < plan.size(); ++k)
        slope += plan.weights[k] * curve_values[k];
    return dim - slope;
}

/// d - sum_j w_j log(energy_j) / log R.
inline double alpha_from_log_energy(int dim, const ScalePlan& plan, std::span<const double> log_energy, double half_width)
{
    if (!(half_width > 1.0))
        throw WindowTooSmall("estimator needs R > 1");
    double slope = 0.0;
    for (std::size_t k = 0; k < plan.size(); ++k)
        slope += plan.weights[k] * log_energy[k];
    return dim - slope / std::log(half_width);
}

struct EstimateReport
{
    double alpha_hat = 0.0;
    bool nonempty = false;
    int dim = 2;
    std::size_t n_points = 0;
    double lambda_hat = 0.0;  ///< intensity of the raw input
    double half_width = 0.0;  ///< R after normalisation
    double j_min = 0.0;
    double j_max = 0.0;
    ScalePlan plan;
    std::vector<double> log_energy; ///< log(sum_i T_j^2) per plan scale
    CurveC curve;                   ///< diagnostic curve, when computed
    std::size_t n_tapers = 0;
};

/*! Multi-scale multi-taper estimate d - sum_j w_j log(sum_i T_j(f_i, R)^2) / log R.
 *
 *  The pattern is expected to be intensity-normalised already; a warning is
 *  issued when its intensity is off by more than 5%. An empty pattern gives
 *  alpha_hat = 0 with nonempty = false.
 */
inline EstimateReport estimate_alpha(const PointPattern& p, const TaperSet& set, const ScalePlan& plan)
{
    if (!(p.half_width() > 1.0))
        throw WindowTooSmall("estimate_alpha: window half-width must exceed 1");
    if (plan.size() < 2 || plan.weights.size() != plan.size())
        throw DegenerateScales("estimate_alpha: scale plan is malformed");

    EstimateReport r;
    r.dim = p.dim();
    r.n_points = p.size();
    r.half_width = p.half_width();
    r.lambda_hat = estimate_intensity(p);
    r.plan = plan;
    r.j_min = plan.scales.front();
    r.j_max = plan.scales.back();
    r.n_tapers = set.size();
    if (p.empty())
        return r;

    if (std::abs(r.lambda_hat - 1.0) > 0.05)
        warn("estimate_alpha: pattern intensity " + std::to_string(r.lambda_hat) + " is not normalised to 1");
    r.nonempty = true;
    r.log_energy = transform_grid(p, set, plan.scales).log_energy();
    r.alpha_hat = alpha_from_log_energy(p.dim(), plan, r.log_energy, p.half_width());
    return r;
}

/// Arithmetic mean of estimates from independent patterns.
inline double pooled_estimate(std::span<const EstimateReport> reports)
{
    if (reports.empty())
        throw EmptyInput("pooled_estimate: no reports");
    double sum = 0.0;
    for (const auto& r : reports)
    {
        if (!r.nonempty)
            throw DomainError("pooled_estimate: every report must come from a non-empty pattern");
        sum += r.alpha_hat;
    }
    return sum / static_cast<double>(reports.size());
}

// ---------------------------------------------------------------------------
// Scale range calibration
// ---------------------------------------------------------------------------

/// Largest scale keeping every taper's numerical support inside the window: 1 - log(max sigma_i) / log R.
inline double calibrate_jmax(double max_support, double half_width)
{
    if (!(half_width > 1.0))
        throw WindowTooSmall("calibrate_jmax: window half-width must exceed 1");
    if (!(max_support > 0.0))
        throw DomainError("calibrate_jmax: supports must be positive");
    const double j = std::min(1.0, 1.0 - std::log(max_support) / std::log(half_width));
    if (j <= 0.1)
        throw WindowTooSmall("calibrate_jmax: window too small for the taper supports (j_max = " +
                             std::to_string(j) + ")");
    return j;
}

inline double calibrate_jmax(const TaperSet& set, double half_width)
{
    return calibrate_jmax(set.max_support(), half_width);
}

struct PoissonCalibration
{
    std::size_t replicates = 20;
    std::uint64_t seed = 0;
    double lo = 0.3;    ///< first grid point
    double hi = 1.3;    ///< last grid point
    double step = 0.01;
};

/// Mean curve C over Poisson(1) replicates in [-R, R]^d on an explicit grid.
inline CurveC poisson_reference_curve(const TaperSet& set, double half_width, std::span<const double> grid,
                                      std::size_t replicates, std::uint64_t seed)
{
    if (replicates < 1)
        throw DomainError("poisson_reference_curve: need at least one replicate");
    CurveC mean;
    mean.grid.assign(grid.begin(), grid.end());
    mean.values.assign(grid.size(), 0.0);
    mean.half_width = half_width;
    mean.tapers = set.preset();
    for (std::size_t r = 0; r < replicates; ++r)
    {
        Rng rng = Rng::substream(seed, r);
        const auto p = poisson(1.0, half_width, rng, set.dim);
        const auto c = curve_C(p, set, grid);
        for (std::size_t k = 0; k < grid.size(); ++k)
            mean.values[k] += c.values[k] / static_cast<double>(replicates);
    }
    return mean;
}

/*! j_max read off Poisson(1) replicates.
 *
 *  For a Poisson pattern the mean curve follows d j + const until the
 *  tapers reach the window border, then flattens. The residual C(j) - d j
 *  is fitted by a constant followed by a free-slope segment,
 *  b + s (j - t)_+, and the breakpoint t with the smallest residual sum of
 *  squares is returned. A fixed tolerance band around the slope-d line is
 *  not used because Monte Carlo noise of the mean curve (about 0.01 with
 *  20 replicates) is comparable to any useful band.
 */
inline double calibrate_jmax_poisson(const TaperSet& set, double half_width, const PoissonCalibration& opt = {})
{
    if (opt.replicates < 5)
        throw DomainError("calibrate_jmax_poisson: need at least 5 replicates");
    if (!(half_width > 1.0))
        throw WindowTooSmall("calibrate_jmax_poisson: window half-width must exceed 1");
    if (!(opt.hi > opt.lo) || !(opt.step > 0.0))
        throw DomainError("calibrate_jmax_poisson: malformed grid");
    std::vector<double> grid;
    for (int k = 0;; ++k)
    {
        const double j = opt.lo + opt.step * k;
        if (j > opt.hi + 1e-9)
            break;
        grid.push_back(j);
    }
    if (grid.size() < 12)
        throw DomainError("calibrate_jmax_poisson: grid too coarse");
    const auto curve = poisson_reference_curve(set, half_width, grid, opt.replicates, opt.seed);

    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXd resid(n);
    for (Eigen::Index k = 0; k < n; ++k)
        resid(k) = curve.values[static_cast<std::size_t>(k)] - set.dim * grid[static_cast<std::size_t>(k)];

    constexpr Eigen::Index kMinSide = 5;
    double best_rss = std::numeric_limits<double>::infinity();
    double best_t = grid.front();
    for (Eigen::Index b = kMinSide; b + kMinSide < n; ++b)
    {
        const double t = grid[static_cast<std::size_t>(b)];
        Eigen::MatrixXd design(n, 2);
        for (Eigen::Index k = 0; k < n; ++k)
            design.row(k) << 1.0, std::max(0.0, grid[static_cast<std::size_t>(k)] - t);
        const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(resid);
        const double rss = (design * coef - resid).squaredNorm();
        if (rss < best_rss)
        {
            best_rss = rss;
            best_t = t;
        }
    }
    return best_t;
}

/*! Knee of a curve by a continuous two-segment fit.
 *
 *  Fits C(j) = a + b j + c (j - t)_+ on the grid points in (0, j_max] for
 *  every interior breakpoint t and returns the best t. Falls back to
 *  j_max / 2 when the best two-segment fit does not reduce the residual
 *  sum of squares of a single line by at least 5%.
 */
inline double select_jmin(const CurveC& curve, double j_max, double min_tail = 1.0 / 3.0)
{
    std::vector<double> js, cs;
    for (std::size_t k = 0; k < curve.grid.size(); ++k)
        if (curve.grid[k] > 0.0 && curve.grid[k] <= j_max + 1e-12)
        {
            js.push_back(curve.grid[k]);
            cs.push_back(curve.values[k]);
        }
    if (js.size() < 10)
        throw DomainError("select_jmin: need at least 10 curve points below j_max");

    const Eigen::Index n = static_cast<Eigen::Index>(js.size());
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(cs.data(), n);
    auto rss_of = [&](const Eigen::MatrixXd& design) {
        Eigen::VectorXd coef = design.colPivHouseholderQr().solve(y);
        return (design * coef - y).squaredNorm();
    };

    Eigen::MatrixXd line(n, 2);
    for (Eigen::Index k = 0; k < n; ++k)
        line.row(k) << 1.0, js[static_cast<std::size_t>(k)];
    const double rss1 = rss_of(line);

    constexpr Eigen::Index kMinSide = 4;
    double best_rss = std::numeric_limits<double>::infinity();
    double best_t = j_max / 2.0;
    const Eigen::Index tail = std::max<Eigen::Index>(kMinSide, static_cast<Eigen::Index>(std::ceil(min_tail * static_cast<double>(n))));
    for (Eigen::Index b = kMinSide - 1; b + tail < n; ++b)
    {
        const double t = js[static_cast<std::size_t>(b)];
        Eigen::MatrixXd hinge(n, 3);
        for (Eigen::Index k = 0; k < n; ++k)
        {
            const double j = js[static_cast<std::size_t>(k)];
            hinge.row(k) << 1.0, j, std::max(0.0, j - t);
        }
        const double rss = rss_of(hinge);
        if (rss < best_rss)
        {
            best_rss = rss;
            best_t = t;
        }
    }
    if (!(best_rss < 0.95 * rss1))
        return j_max / 2.0;
    return best_t;
}

// ---------------------------------------------------------------------------
// Full estimation recipe
// ---------------------------------------------------------------------------

struct EstimatorConfig
{
    std::optional<double> j_min;        ///< override of the knee selection
    std::optional<double> j_max;        ///< override of the support rule
    std::vector<double> explicit_scales; ///< when non-empty, used as J directly
    std::size_t n_scales = kDefaultScaleCount;
    double grid_lo = 0.1;
    double grid_hi = 1.3;
    std::size_t grid_points = 120;
};

/*! normalise -> j_max -> diagnostic curve -> j_min -> J -> estimate.
 *
 *  Returns a report with nonempty = false for an empty input.
 */
inline EstimateReport estimate_pattern(const PointPattern& raw, const TaperSet& set, const EstimatorConfig& cfg = {})
{
    if (raw.empty())
    {
        EstimateReport r;
        r.dim = raw.dim();
        r.half_width = raw.half_width();
        r.n_tapers = set.size();
        return r;
    }
    const auto [pattern, norm] = normalize_intensity(raw);
    const double r_bar = pattern.half_width();

    ScalePlan plan;
    CurveC curve;
    if (!cfg.explicit_scales.empty())
    {
        plan = least_squares_weights(cfg.explicit_scales);
    }
    else
    {
        const double j_max = cfg.j_max ? *cfg.j_max : calibrate_jmax(set, r_bar);
        double j_min = 0.0;
        if (cfg.j_min)
        {
            j_min = *cfg.j_min;
        }
        else
        {
            const auto grid = diagnostic_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_points);
            curve = curve_C(pattern, set, grid);
            j_min = select_jmin(curve, j_max);
        }
        plan = default_scale_plan(j_min, j_max, cfg.n_scales);
    }

    EstimateReport report = estimate_alpha(pattern, set, plan);
    report.lambda_hat = norm.lambda_hat;
    report.curve = std::move(curve);
    return report;
}

} // namespace hyperu
