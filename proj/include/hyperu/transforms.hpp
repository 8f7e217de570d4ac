#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "parallel.hpp"
#include "tapers.hpp"

namespace hyperu {

/// Points per block of the fixed reduction tree.
inline constexpr std::size_t kReductionBlock = 1024;

/// T_j(f_i, R) for every scale j (rows) and taper i (columns).
struct TransformGrid
{
    std::vector<double> scales;
    std::size_t n_tapers = 0;
    std::vector<double> values;

    double at(std::size_t scale, std::size_t taper) const { return values[scale * n_tapers + taper]; }
    std::span<const double> row(std::size_t scale) const
    {
        return {values.data() + scale * n_tapers, n_tapers};
    }

    /// log(sum_i T_j(f_i)^2) per scale; throws ZeroTransformSum on an exact zero.
    std::vector<double> log_energy() const
    {
        std::vector<double> out(scales.size());
        for (std::size_t s = 0; s < scales.size(); ++s)
        {
            double sum = 0.0;
            for (double t : row(s))
                sum += t * t;
            if (!(sum > 0.0))
                throw ZeroTransformSum("sum of squared transforms vanishes at scale j = " + std::to_string(scales[s]));
            out[s] = std::log(sum);
        }
        return out;
    }
};

namespace detail {

/// Lexicographic order of the points, so sums do not depend on input order.
inline std::vector<std::size_t> canonical_order(const PointPattern& p)
{
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto xa = p.point(a);
        auto xb = p.point(b);
        return std::lexicographical_compare(xa.begin(), xa.end(), xb.begin(), xb.end());
    });
    return order;
}

inline void pairwise_combine(std::vector<std::vector<double>>& partials)
{
    while (partials.size() > 1)
    {
        std::vector<std::vector<double>> next;
        next.reserve((partials.size() + 1) / 2);
        for (std::size_t k = 0; k + 1 < partials.size(); k += 2)
        {
            auto merged = std::move(partials[k]);
            const auto& other = partials[k + 1];
            for (std::size_t m = 0; m < merged.size(); ++m)
                merged[m] += other[m];
            next.push_back(std::move(merged));
        }
        if (partials.size() % 2 == 1)
            next.push_back(std::move(partials.back()));
        partials = std::move(next);
    }
}

inline void check_scales(const PointPattern& p, std::span<const double> scales)
{
    if (!(p.half_width() > 1.0))
        throw WindowTooSmall("truncated transforms need a window half-width R > 1");
    for (double j : scales)
        if (!(j > 0.0) || !std::isfinite(j))
            throw DomainError("transform scales must be positive and finite");
}

} // namespace detail

/*! All truncated wavelet transforms T_j(f_i, R) = sum_{x in pattern} f_i(x / R^j).
 *
 *  Per point and scale, the Hermite functions of orders below i_max are
 *  evaluated once per coordinate and combined for every taper. Points are
 *  visited in lexicographic order, summed sequentially within blocks of
 *  kReductionBlock and the block totals are reduced pairwise.
 */
inline TransformGrid transform_grid(const PointPattern& p, const TaperSet& set, std::span<const double> scales)
{
    if (p.dim() != set.dim)
        throw DomainError("transform_grid: pattern and taper set dimensions differ");
    detail::check_scales(p, scales);

    TransformGrid out;
    out.scales.assign(scales.begin(), scales.end());
    out.n_tapers = set.size();
    out.values.assign(scales.size() * set.size(), 0.0);
    if (p.empty() || set.size() == 0)
        return out;

    const auto order = detail::canonical_order(p);
    const std::size_t n = order.size();
    const std::size_t n_blocks = (n + kReductionBlock - 1) / kReductionBlock;
    const std::size_t n_orders = static_cast<std::size_t>(set.i_max);
    const double log_r = std::log(p.half_width());

    // Flattened (order_x, order_y) pairs of the tapers.
    std::vector<std::size_t> first(set.size()), second(set.size());
    for (std::size_t k = 0; k < set.size(); ++k)
    {
        first[k] = static_cast<std::size_t>(set.indices[k][0]);
        second[k] = set.dim == 2 ? static_cast<std::size_t>(set.indices[k][1]) : 0;
    }

    parallel_for(scales.size(), [&](std::size_t s) {
        const double inv = set.scale * std::exp(-scales[s] * log_r);
        std::vector<double> hx(n_orders), hy(n_orders, 1.0);
        std::vector<std::vector<double>> partials(n_blocks, std::vector<double>(set.size(), 0.0));
        for (std::size_t b = 0; b < n_blocks; ++b)
        {
            auto& acc = partials[b];
            const std::size_t end = std::min(n, (b + 1) * kReductionBlock);
            for (std::size_t q = b * kReductionBlock; q < end; ++q)
            {
                auto x = p.point(order[q]);
                hermite_functions(inv * x[0], hx);
                if (set.dim == 2)
                    hermite_functions(inv * x[1], hy);
                for (std::size_t k = 0; k < acc.size(); ++k)
                    acc[k] += hx[first[k]] * hy[second[k]];
            }
        }
        detail::pairwise_combine(partials);
        std::copy(partials[0].begin(), partials[0].end(), out.values.begin() + static_cast<std::ptrdiff_t>(s * set.size()));
    });
    return out;
}

/// T_j(f_i, R) for one taper and one scale; bit-identical to the transform_grid entry.
inline double wavelet_transform(const PointPattern& p, const TaperSet& set, const TaperIndex& i, double j)
{
    if (!set.find(i))
        throw DomainError("wavelet_transform: index " + i.to_string() + " not in the taper set");
    TaperSet single = set;
    single.indices = {i};
    single.supports = {numerical_support(set, i, set.eps)};
    const double scale[1] = {j};
    return transform_grid(p, single, scale).values[0];
}

/// Diagnostic curve C(j) = log(sum_i T_j(f_i, R)^2) / log R.
struct CurveC
{
    std::vector<double> grid;
    std::vector<double> values;
    double half_width = 0.0;
    TaperPreset tapers;
};

inline CurveC curve_from_transforms(const TransformGrid& t, double half_width, const TaperPreset& tapers)
{
    CurveC c;
    c.grid = t.scales;
    c.values = t.log_energy();
    const double log_r = std::log(half_width);
    for (double& v : c.values)
        v /= log_r;
    c.half_width = half_width;
    c.tapers = tapers;
    return c;
}

inline CurveC curve_C(const PointPattern& p, const TaperSet& set, std::span<const double> grid)
{
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1]))
            throw DomainError("curve_C: grid must be strictly increasing");
    return curve_from_transforms(transform_grid(p, set, grid), p.half_width(), set.preset());
}

/// Uniform grid of `count` points on (lo, hi], the default diagnostic range.
inline std::vector<double> diagnostic_grid(double lo = 0.1, double hi = 1.3, std::size_t count = 120)
{
    std::vector<double> g(count);
    for (std::size_t k = 0; k < count; ++k)
        g[k] = lo + (hi - lo) * static_cast<double>(k + 1) / static_cast<double>(count);
    return g;
}

/*! Scattering intensity |sum_x e^{-i k.x}|^2 / |W|^exponent.
 *
 *  exponent = 1 is the usual normalisation; exponent = 2 divides by the
 *  squared window volume. Diagnostics only.
 */
inline double scattering_intensity(const PointPattern& p, std::span<const double> k, int exponent = 1)
{
    if (static_cast<int>(k.size()) != p.dim())
        throw DomainError("scattering_intensity: frequency dimension mismatch");
    if (std::all_of(k.begin(), k.end(), [](double v) { return v == 0.0; }))
        throw ZeroFrequency("scattering_intensity: k must be non-zero");
    double re = 0.0;
    double im = 0.0;
    for (std::size_t q = 0; q < p.size(); ++q)
    {
        auto x = p.point(q);
        double phase = 0.0;
        for (std::size_t l = 0; l < k.size(); ++l)
            phase += k[l] * x[l];
        re += std::cos(phase);
        im -= std::sin(phase);
    }
    return (re * re + im * im) / std::pow(p.window().volume(p.dim()), exponent);
}

} // namespace hyperu
