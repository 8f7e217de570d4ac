#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace hyperu {

inline constexpr int kMaxTaperDim = 2;

/// Multi-index (i_1, ..., i_d) of a tensor Hermite wavelet.
struct TaperIndex
{
    std::array<int, kMaxTaperDim> order{};
    int dim = 2;

    TaperIndex() = default;
    TaperIndex(int i1) : order{i1, 0}, dim(1) {}
    TaperIndex(int i1, int i2) : order{i1, i2}, dim(2) {}

    int operator[](int l) const { return order[static_cast<std::size_t>(l)]; }
    int max_order() const { return dim == 1 ? order[0] : std::max(order[0], order[1]); }
    int total_order() const { return dim == 1 ? order[0] : order[0] + order[1]; }
    bool has_odd_component() const { return (order[0] & 1) || (dim == 2 && (order[1] & 1)); }

    friend bool operator==(const TaperIndex& a, const TaperIndex& b)
    {
        return a.dim == b.dim && a.order[0] == b.order[0] && (a.dim == 1 || a.order[1] == b.order[1]);
    }

    std::string to_string() const
    {
        return dim == 1 ? "(" + std::to_string(order[0]) + ")"
                        : "(" + std::to_string(order[0]) + "," + std::to_string(order[1]) + ")";
    }
};

namespace detail {

struct HermiteRecurrence
{
    std::array<double, kMaxHermiteOrder + 2> up{};   // sqrt(2 / (k + 1))
    std::array<double, kMaxHermiteOrder + 2> down{}; // sqrt(k / (k + 1))

    HermiteRecurrence()
    {
        for (std::size_t k = 0; k < up.size(); ++k)
        {
            up[k] = std::sqrt(2.0 / static_cast<double>(k + 1));
            down[k] = std::sqrt(static_cast<double>(k) / static_cast<double>(k + 1));
        }
    }
};

inline const HermiteRecurrence& hermite_recurrence()
{
    static const HermiteRecurrence table;
    return table;
}

} // namespace detail

/*! Hermite functions h_k(y) = e^{-y^2/2} H_k(y) for k = 0 .. out.size()-1.
 *
 *  Upward three-term recurrence
 *  h_{k+1} = sqrt(2/(k+1)) y h_k - sqrt(k/(k+1)) h_{k-1}, h_0 = pi^{-1/4} e^{-y^2/2}.
 */
inline void hermite_functions(double y, std::span<double> out)
{
    if (out.empty())
        return;
    if (out.size() > static_cast<std::size_t>(kMaxHermiteOrder) + 1)
        throw OverflowError("hermite_functions: order above " + std::to_string(kMaxHermiteOrder));
    const auto& rec = detail::hermite_recurrence();
    const double inv_pi_quarter = 0.75112554446494248286; // pi^{-1/4}
    out[0] = inv_pi_quarter * std::exp(-0.5 * y * y);
    if (out.size() == 1)
        return;
    out[1] = std::numbers::sqrt2 * y * out[0];
    for (std::size_t k = 1; k + 1 < out.size(); ++k)
        out[k + 1] = rec.up[k] * y * out[k] - rec.down[k] * out[k - 1];
}

/// Single Hermite function value e^{-y^2/2} H_n(y).
inline double hermite_function(int n, double y)
{
    std::array<double, kMaxHermiteOrder + 1> buf{};
    hermite_functions(y, std::span<double>(buf.data(), static_cast<std::size_t>(n) + 1));
    return buf[static_cast<std::size_t>(n)];
}

/// Unscaled tensor Hermite wavelet psi_i(x) = prod_l h_{i_l}(x_l).
inline double hermite_wavelet(const TaperIndex& i, std::span<const double> x)
{
    double v = 1.0;
    for (int l = 0; l < i.dim; ++l)
        v *= hermite_function(i[l], x[static_cast<std::size_t>(l)]);
    return v;
}

/*! Default threshold below which a taper counts as vanished.
 *
 *  With c = 5 and i_max = 10 it puts the largest support near 1.1, where
 *  the curve of a Poisson pattern starts to feel the window border. A
 *  machine-precision threshold would give 2.06 and cut j_max to 0.80 at
 *  R = 40.
 */
inline constexpr double kDefaultSupportEps = 1e-2;

/// Serializable description of a taper family.
struct TaperPreset
{
    int dim = 2;
    int i_max = 10;
    double scale = 5.0;
    double eps = kDefaultSupportEps;
};

/*! Family of scaled Hermite wavelets f_i(x) = psi_i(c x).
 *
 *  Indices range over |i|_inf < i_max with at least one odd component,
 *  which makes every taper integrate to zero and vanish at the origin.
 */
class TaperSet
{
public:
    int dim = 2;
    int i_max = 1;
    double scale = 5.0;
    double eps = kDefaultSupportEps;
    std::vector<TaperIndex> indices;
    std::vector<double> supports;                          ///< numerical support per index
    std::vector<std::vector<SignedLogValue>> coeff_cache;  ///< hermite_coeffs(k), k < i_max

    std::size_t size() const { return indices.size(); }
    double max_support() const { return supports.empty() ? 0.0 : *std::max_element(supports.begin(), supports.end()); }
    TaperPreset preset() const { return {dim, i_max, scale, eps}; }

    std::optional<std::size_t> find(const TaperIndex& i) const
    {
        auto it = std::find(indices.begin(), indices.end(), i);
        if (it == indices.end())
            return std::nullopt;
        return static_cast<std::size_t>(it - indices.begin());
    }
};

namespace detail {

/// sup_y |h_n(y)|, found on a fine grid over the oscillatory region.
inline double hermite_function_sup(int n)
{
    const double limit = std::sqrt(2.0 * n + 1.0) + 2.0;
    double best = 0.0;
    for (int k = 0;; ++k)
    {
        const double y = k * 1e-3;
        if (y > limit)
            break;
        best = std::max(best, std::abs(hermite_function(n, y)));
    }
    return best;
}

} // namespace detail

/*! Numerical support sigma_i of x -> psi_i(c x).
 *
 *  Smallest sigma on the grid 0.01 * k such that |psi_i(c x)| <= eps whenever
 *  |x|_inf >= sigma. Each axis is scanned outward up to 4 (sqrt(2 |i|_inf) + 6) / c,
 *  bounding the other factors by their supremum.
 */
inline double numerical_support(const TaperIndex& i, double scale, double eps)
{
    if (!(eps > 0.0))
        throw DomainError("numerical_support: eps must be positive");
    if (!(scale > 0.0))
        throw DomainError("numerical_support: scale must be positive");
    constexpr double kStep = 0.01;
    const double limit = 4.0 * (std::sqrt(2.0 * i.max_order()) + 6.0) / scale;
    const int steps = static_cast<int>(std::ceil(limit / kStep));

    double sigma = 0.0;
    for (int axis = 0; axis < i.dim; ++axis)
    {
        double others = 1.0;
        for (int l = 0; l < i.dim; ++l)
            if (l != axis)
                others *= detail::hermite_function_sup(i[l]);
        int last_above = -1;
        for (int k = 0; k <= steps; ++k)
        {
            const double t = k * kStep;
            if (std::abs(hermite_function(i[axis], scale * t)) * others > eps)
                last_above = k;
        }
        sigma = std::max(sigma, (last_above + 1) * kStep);
    }
    return sigma;
}

inline double numerical_support(const TaperSet& set, const TaperIndex& i, double eps)
{
    return numerical_support(i, set.scale, eps);
}

inline TaperSet build_taper_set(int d, int i_max, double c = 5.0, double eps = kDefaultSupportEps)
{
    if (d < 1 || d > kMaxTaperDim)
        throw DomainError("build_taper_set: dimension must be 1 or 2");
    if (i_max < 1 || i_max > kMaxHermiteOrder)
        throw DomainError("build_taper_set: i_max must be in [1, " + std::to_string(kMaxHermiteOrder) + "]");
    if (!(c > 0.0))
        throw DomainError("build_taper_set: taper scale must be positive");

    TaperSet set;
    set.dim = d;
    set.i_max = i_max;
    set.scale = c;
    set.eps = eps;
    if (d == 1)
    {
        for (int a = 0; a < i_max; ++a)
            if (a & 1)
                set.indices.emplace_back(a);
    }
    else
    {
        for (int a = 0; a < i_max; ++a)
            for (int b = 0; b < i_max; ++b)
                if ((a & 1) || (b & 1))
                    set.indices.emplace_back(a, b);
    }
    set.supports.reserve(set.indices.size());
    for (const auto& i : set.indices)
        set.supports.push_back(numerical_support(i, c, eps));
    for (int k = 0; k < i_max; ++k)
        set.coeff_cache.push_back(hermite_coeffs(k));
    return set;
}

inline TaperSet build_taper_set(const TaperPreset& p) { return build_taper_set(p.dim, p.i_max, p.scale, p.eps); }

/// f_i(x) = psi_i(c x) for the set's scale c.
inline double taper_eval(const TaperSet& set, const TaperIndex& i, std::span<const double> x)
{
    if (i.dim != set.dim || static_cast<int>(x.size()) != set.dim)
        throw DomainError("taper_eval: dimension mismatch");
    if (i.max_order() >= set.i_max)
        throw DomainError("taper_eval: index " + i.to_string() + " outside the taper set");
    double v = 1.0;
    for (int l = 0; l < i.dim; ++l)
        v *= hermite_function(i[l], set.scale * x[static_cast<std::size_t>(l)]);
    return v;
}

} // namespace hyperu
