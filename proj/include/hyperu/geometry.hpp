#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace hyperu {

/// Observation window [-R, R]^d. Membership is closed: |x|_inf <= R.
struct Window
{
    double half_width = 1.0;

    explicit Window(double r = 1.0) : half_width(r)
    {
        if (!(r > 0.0) || !std::isfinite(r))
            throw DomainError("Window: half-width must be positive and finite");
    }

    /// Ball windows are replaced by their bounding cube.
    static Window from_ball(double radius)
    {
        warn("ball window of radius " + std::to_string(radius) + " converted to its bounding cube");
        return Window(radius);
    }

    double volume(int dim) const { return std::pow(2.0 * half_width, dim); }

    bool contains(std::span<const double> x) const
    {
        return std::all_of(x.begin(), x.end(), [&](double v) { return std::abs(v) <= half_width; });
    }
};

enum class OutsidePoints
{
    reject, ///< throw InvalidPattern
    clip    ///< silently drop them
};

/// Finite point set in R^d observed through a cubic window.
class PointPattern
{
public:
    PointPattern(int dim, Window window) : m_dim(dim), m_window(window)
    {
        if (dim < 1)
            throw DomainError("PointPattern: dimension must be >= 1");
    }

    /// coords holds the points row by row (n * dim values).
    PointPattern(int dim, std::vector<double> coords, Window window, OutsidePoints policy = OutsidePoints::reject)
        : PointPattern(dim, window)
    {
        if (coords.size() % static_cast<std::size_t>(dim) != 0)
            throw InvalidPattern("PointPattern: coordinate count is not a multiple of the dimension");
        const std::size_t n = coords.size() / static_cast<std::size_t>(dim);
        m_coords.reserve(coords.size());
        for (std::size_t i = 0; i < n; ++i)
        {
            std::span<const double> x(coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
            if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }))
                throw InvalidPattern("PointPattern: non-finite coordinate at point " + std::to_string(i));
            if (!m_window.contains(x))
            {
                if (policy == OutsidePoints::reject)
                    throw InvalidPattern("PointPattern: point " + std::to_string(i) + " lies outside the window");
                continue;
            }
            m_coords.insert(m_coords.end(), x.begin(), x.end());
        }
    }

    int dim() const { return m_dim; }
    const Window& window() const { return m_window; }
    double half_width() const { return m_window.half_width; }
    std::size_t size() const { return m_coords.size() / static_cast<std::size_t>(m_dim); }
    bool empty() const { return m_coords.empty(); }

    std::span<const double> point(std::size_t i) const
    {
        return {m_coords.data() + i * static_cast<std::size_t>(m_dim), static_cast<std::size_t>(m_dim)};
    }

    const std::vector<double>& coords() const { return m_coords; }

private:
    int m_dim;
    Window m_window;
    std::vector<double> m_coords;
};

struct NormalizationRecord
{
    double lambda_hat = 1.0;   ///< points per unit volume before rescaling
    double scale_factor = 1.0; ///< lambda_hat^(1/d)
};

/// n / (2R)^d.
inline double estimate_intensity(const PointPattern& p)
{
    return static_cast<double>(p.size()) / p.window().volume(p.dim());
}

/// Rescales lengths by lambda_hat^(1/d) so the pattern has unit intensity.
inline std::pair<PointPattern, NormalizationRecord> normalize_intensity(const PointPattern& p)
{
    if (p.empty())
        throw EmptyPattern("normalize_intensity: pattern has no points");
    NormalizationRecord rec;
    rec.lambda_hat = estimate_intensity(p);

    // lambda_hat^(1/d) R == n^(1/d) / 2; computing the new half-width from n
    // directly keeps n / |W| == 1 up to a single rounding.
    const double new_r = 0.5 * std::pow(static_cast<double>(p.size()), 1.0 / p.dim());
    const double factor = new_r / p.half_width();
    rec.scale_factor = factor;

    std::vector<double> coords = p.coords();
    for (double& v : coords)
        v = std::clamp(v * factor, -new_r, new_r);
    return {PointPattern(p.dim(), std::move(coords), Window(new_r)), rec};
}

/// Points with |x|_inf <= r, observed through [-r, r]^d.
inline PointPattern restrict(const PointPattern& p, double r)
{
    if (!(r > 0.0))
        throw DomainError("restrict: half-width must be positive");
    PointPattern out(p.dim(), Window(r));
    std::vector<double> kept;
    for (std::size_t i = 0; i < p.size(); ++i)
    {
        auto x = p.point(i);
        if (out.window().contains(x))
            kept.insert(kept.end(), x.begin(), x.end());
    }
    return PointPattern(p.dim(), std::move(kept), Window(r));
}

} // namespace hyperu
