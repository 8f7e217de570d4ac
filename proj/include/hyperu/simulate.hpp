#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "numerics.hpp"
#include "random.hpp"

namespace hyperu {

// ---------------------------------------------------------------------------
// Homogeneous Poisson process
// ---------------------------------------------------------------------------

inline PointPattern poisson(double lambda, double half_width, Rng& rng, int dim = 2)
{
    if (!(lambda > 0.0))
        throw DomainError("poisson: intensity must be positive");
    const Window w(half_width);
    const std::uint64_t n = rng.poisson(lambda * w.volume(dim));
    std::vector<double> coords(static_cast<std::size_t>(n) * static_cast<std::size_t>(dim));
    for (double& v : coords)
        v = rng.uniform(-half_width, half_width);
    return PointPattern(dim, std::move(coords), w);
}

inline PointPattern poisson(double lambda, double half_width, std::uint64_t seed, int dim = 2)
{
    Rng rng(seed);
    return poisson(lambda, half_width, rng, dim);
}

// ---------------------------------------------------------------------------
// One-sided stable law, E exp(-s Y) = exp(-s^delta)
// ---------------------------------------------------------------------------

/// Kanter's representation Y = (a(V) / W)^{(1-delta)/delta}.
inline double one_sided_stable(double delta, Rng& rng)
{
    if (!(delta > 0.0 && delta < 1.0))
        throw DomainError("one_sided_stable: delta must lie in (0, 1)");
    const double pi = std::numbers::pi;
    const double v = rng.uniform();
    const double w = rng.exponential();
    const double a = std::sin((1.0 - delta) * pi * v) * std::pow(std::sin(delta * pi * v), delta / (1.0 - delta)) /
                     std::pow(std::sin(pi * v), 1.0 / (1.0 - delta));
    return std::pow(a / w, (1.0 - delta) / delta);
}

inline double one_sided_stable(double delta, std::uint64_t seed)
{
    Rng rng(seed);
    return one_sided_stable(delta, rng);
}

// ---------------------------------------------------------------------------
// Cloaked perturbed lattice
// ---------------------------------------------------------------------------

namespace detail {

/// Rough 0.999 quantile of the one-sided delta-stable law from its tail P(Y > y) ~ y^-delta / Gamma(1 - delta).
inline double stable_tail_quantile(double delta)
{
    if (delta >= 1.0)
        return 1.0;
    return std::pow(1000.0 / std::tgamma(1.0 - delta), 1.0 / delta);
}

} // namespace detail

/*! Lattice Z^2 with a global uniform shift and independent uniform cloaking
 *  shifts, each site then displaced by sqrt(Y) sigma Z, Y one-sided
 *  (alpha/2)-stable and Z standard bivariate normal. alpha = 2 uses Y = 1.
 *
 *  Sites are generated in a margin around the window so that displaced
 *  points can enter it; the margin is 6 sigma times a stable tail
 *  allowance, capped at 3R.
 */
inline PointPattern cloaked_lattice(double alpha, double sigma, double half_width, std::uint64_t seed)
{
    if (!(alpha > 0.0 && alpha <= 2.0))
        throw DomainError("cloaked_lattice: alpha must lie in (0, 2]");
    if (!(sigma >= 0.0))
        throw DomainError("cloaked_lattice: sigma must be non-negative");
    const Window w(half_width);
    const double delta = alpha / 2.0;
    const double margin = std::min(6.0 * sigma * std::sqrt(detail::stable_tail_quantile(delta)), 3.0 * half_width);

    Rng rng(seed);
    const double shift[2] = {rng.uniform(), rng.uniform()};
    const long lo = static_cast<long>(std::floor(-half_width - margin)) - 1;
    const long hi = static_cast<long>(std::ceil(half_width + margin)) + 1;

    std::vector<double> coords;
    coords.reserve(static_cast<std::size_t>(4.0 * half_width * half_width * 1.1) * 2);
    for (long a = lo; a <= hi; ++a)
        for (long b = lo; b <= hi; ++b)
        {
            double x = static_cast<double>(a) + shift[0] + rng.uniform() - 0.5;
            double y = static_cast<double>(b) + shift[1] + rng.uniform() - 0.5;
            const double amp = sigma * (delta < 1.0 ? std::sqrt(one_sided_stable(delta, rng)) : 1.0);
            x += amp * rng.normal();
            y += amp * rng.normal();
            if (std::abs(x) <= half_width && std::abs(y) <= half_width)
            {
                coords.push_back(x);
                coords.push_back(y);
            }
        }
    return PointPattern(2, std::move(coords), w);
}

// ---------------------------------------------------------------------------
// Bucket grid on the torus or the plane
// ---------------------------------------------------------------------------

namespace detail {

class BucketGrid
{
public:
    BucketGrid(double half_width, double cell, bool periodic)
        : m_lo(-half_width), m_side(2.0 * half_width), m_periodic(periodic)
    {
        m_cells = std::max<long>(1, static_cast<long>(std::floor(m_side / cell)));
        m_cell = m_side / static_cast<double>(m_cells);
        m_buckets.assign(static_cast<std::size_t>(m_cells * m_cells), {});
    }

    long cells() const { return m_cells; }
    double cell_size() const { return m_cell; }

    long cell_of(double v) const
    {
        return std::clamp(static_cast<long>(std::floor((v - m_lo) / m_cell)), 0L, m_cells - 1);
    }

    void insert(std::size_t id, double x, double y) { bucket(cell_of(x), cell_of(y)).push_back(id); }

    void erase(std::size_t id, double x, double y)
    {
        auto& b = bucket(cell_of(x), cell_of(y));
        b.erase(std::find(b.begin(), b.end(), id));
    }

    /// Calls f(id) for every id in the cells at Chebyshev cell distance exactly ring.
    template <typename F>
    void visit_ring(long cx, long cy, long ring, F&& f) const
    {
        auto visit = [&](long a, long b) {
            if (m_periodic)
            {
                a = ((a % m_cells) + m_cells) % m_cells;
                b = ((b % m_cells) + m_cells) % m_cells;
            }
            else if (a < 0 || b < 0 || a >= m_cells || b >= m_cells)
            {
                return;
            }
            for (std::size_t id : m_buckets[static_cast<std::size_t>(a * m_cells + b)])
                f(id);
        };
        if (ring == 0)
        {
            visit(cx, cy);
            return;
        }
        // On the torus, rings wider than the grid would revisit cells.
        if (m_periodic && 2 * ring + 1 > m_cells)
        {
            if (2 * ring - 1 < m_cells)
                for (long a = 0; a < m_cells; ++a)
                    for (long b = 0; b < m_cells; ++b)
                    {
                        const long da = torus_cell_distance(a, cx);
                        const long db = torus_cell_distance(b, cy);
                        if (std::max(da, db) >= ring)
                            visit(a, b);
                    }
            return;
        }
        for (long a = cx - ring; a <= cx + ring; ++a)
        {
            visit(a, cy - ring);
            visit(a, cy + ring);
        }
        for (long b = cy - ring + 1; b <= cy + ring - 1; ++b)
        {
            visit(cx - ring, b);
            visit(cx + ring, b);
        }
    }

    long max_ring() const { return m_periodic ? m_cells / 2 + 1 : m_cells; }

private:
    std::vector<std::size_t>& bucket(long a, long b) { return m_buckets[static_cast<std::size_t>(a * m_cells + b)]; }

    long torus_cell_distance(long a, long b) const
    {
        const long d = std::abs(a - b) % m_cells;
        return std::min(d, m_cells - d);
    }

    double m_lo;
    double m_side;
    bool m_periodic;
    long m_cells = 1;
    double m_cell = 1.0;
    std::vector<std::vector<std::size_t>> m_buckets;
};

/// Nearest id in the grid to (x, y) under dist2, or npos when the grid is empty.
template <typename Dist2>
std::size_t nearest_in_grid(const BucketGrid& grid, double x, double y, Dist2&& dist2)
{
    constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    const long cx = grid.cell_of(x);
    const long cy = grid.cell_of(y);
    std::size_t best = npos;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (long ring = 0; ring <= grid.max_ring(); ++ring)
    {
        // Everything in ring k or beyond is at least (k - 1) cells away.
        if (best != npos)
        {
            const double reach = static_cast<double>(ring - 1) * grid.cell_size();
            if (ring >= 1 && reach * reach > best_d2)
                break;
        }
        grid.visit_ring(cx, cy, ring, [&](std::size_t id) {
            const double d2 = dist2(id);
            if (d2 < best_d2 || (d2 == best_d2 && id < best))
            {
                best_d2 = d2;
                best = id;
            }
        });
    }
    return best;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Matched point process
// ---------------------------------------------------------------------------

namespace detail {

inline double torus_delta(double a, double b, double side)
{
    double d = std::abs(a - b);
    d = std::fmod(d, side);
    return std::min(d, side - d);
}

/// One attempt; returns false when the Poisson points run out.
inline bool try_match(double lambda_p, double half_width, Rng& rng, std::vector<double>& out)
{
    const double side = 2.0 * half_width;
    const long per_axis = std::max(1L, std::lround(side));
    const double spacing = side / static_cast<double>(per_axis);
    const double shift[2] = {rng.uniform() * spacing, rng.uniform() * spacing};

    std::vector<double> lattice;
    lattice.reserve(static_cast<std::size_t>(2 * per_axis * per_axis));
    for (long a = 0; a < per_axis; ++a)
        for (long b = 0; b < per_axis; ++b)
        {
            lattice.push_back(-half_width + shift[0] + spacing * static_cast<double>(a));
            lattice.push_back(-half_width + shift[1] + spacing * static_cast<double>(b));
        }
    const std::size_t n_lattice = lattice.size() / 2;

    const std::uint64_t n_poisson = rng.poisson(lambda_p * side * side);
    if (n_poisson < n_lattice)
        return false;
    std::vector<double> pois(static_cast<std::size_t>(n_poisson) * 2);
    for (double& v : pois)
        v = rng.uniform(-half_width, half_width);

    BucketGrid lgrid(half_width, 1.0, true);
    BucketGrid pgrid(half_width, 1.0 / std::sqrt(lambda_p), true);
    for (std::size_t k = 0; k < n_lattice; ++k)
        lgrid.insert(k, lattice[2 * k], lattice[2 * k + 1]);
    for (std::size_t k = 0; k < n_poisson; ++k)
        pgrid.insert(k, pois[2 * k], pois[2 * k + 1]);

    auto dist2 = [&](const std::vector<double>& a, std::size_t ia, const std::vector<double>& b, std::size_t ib) {
        const double dx = torus_delta(a[2 * ia], b[2 * ib], side);
        const double dy = torus_delta(a[2 * ia + 1], b[2 * ib + 1], side);
        return dx * dx + dy * dy;
    };

    std::vector<std::size_t> open_lattice(n_lattice);
    std::iota(open_lattice.begin(), open_lattice.end(), std::size_t{0});
    std::vector<std::size_t> matched;
    matched.reserve(n_lattice);
    std::size_t poisson_left = static_cast<std::size_t>(n_poisson);

    while (!open_lattice.empty())
    {
        if (poisson_left == 0)
            return false;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t l : open_lattice)
        {
            const std::size_t p = nearest_in_grid(pgrid, lattice[2 * l], lattice[2 * l + 1],
                                                  [&](std::size_t id) { return dist2(lattice, l, pois, id); });
            const std::size_t back = nearest_in_grid(lgrid, pois[2 * p], pois[2 * p + 1],
                                                     [&](std::size_t id) { return dist2(pois, p, lattice, id); });
            if (back == l)
                pairs.emplace_back(l, p);
        }
        if (pairs.empty())
            throw NoConvergence("matched_process: no mutual nearest neighbours in a round");
        for (auto [l, p] : pairs)
        {
            lgrid.erase(l, lattice[2 * l], lattice[2 * l + 1]);
            pgrid.erase(p, pois[2 * p], pois[2 * p + 1]);
            matched.push_back(p);
            --poisson_left;
        }
        std::vector<std::size_t> still_open;
        std::sort(pairs.begin(), pairs.end());
        std::size_t cursor = 0;
        for (std::size_t l : open_lattice)
        {
            while (cursor < pairs.size() && pairs[cursor].first < l)
                ++cursor;
            if (cursor < pairs.size() && pairs[cursor].first == l)
                continue;
            still_open.push_back(l);
        }
        open_lattice = std::move(still_open);
    }

    std::sort(matched.begin(), matched.end());
    out.clear();
    out.reserve(matched.size() * 2);
    for (std::size_t p : matched)
    {
        out.push_back(pois[2 * p]);
        out.push_back(pois[2 * p + 1]);
    }
    return true;
}

} // namespace detail

/*! Poisson points of intensity lambda_p matched to a unit lattice.
 *
 *  On the torus [-R, R)^2, all lattice/Poisson pairs that are mutual
 *  nearest neighbours are matched and removed in simultaneous rounds until
 *  every lattice point is matched. The matched Poisson points are returned.
 *  When the Poisson sample is too small, up to three fresh attempts are
 *  made before throwing Unmatchable.
 */
inline PointPattern matched_process(double lambda_p, double half_width, std::uint64_t seed)
{
    if (!(lambda_p > 1.0))
        throw DomainError("matched_process: lambda_p must exceed 1");
    const Window w(half_width);
    std::vector<double> coords;
    for (std::uint64_t attempt = 0; attempt <= 3; ++attempt)
    {
        Rng rng(seed, attempt);
        if (detail::try_match(lambda_p, half_width, rng, coords))
            return PointPattern(2, std::move(coords), w);
    }
    throw Unmatchable("matched_process: Poisson sample smaller than the lattice after 3 retries");
}

// ---------------------------------------------------------------------------
// Random sequential adsorption (Matern III hard core)
// ---------------------------------------------------------------------------

/*! Poisson(lambda_prop) proposals with uniform marks, visited by increasing
 *  mark; a proposal is kept unless a kept point lies at distance < r.
 */
inline PointPattern rsa(double lambda_prop, double r, double half_width, std::uint64_t seed)
{
    if (!(lambda_prop > 0.0))
        throw DomainError("rsa: proposal intensity must be positive");
    if (!(r >= 0.0))
        throw DomainError("rsa: hard-core distance must be non-negative");
    const Window w(half_width);
    Rng rng(seed);
    const std::uint64_t n = rng.poisson(lambda_prop * w.volume(2));
    struct Proposal
    {
        double mark, x, y;
    };
    std::vector<Proposal> props(static_cast<std::size_t>(n));
    for (auto& p : props)
    {
        p.x = rng.uniform(-half_width, half_width);
        p.y = rng.uniform(-half_width, half_width);
        p.mark = rng.uniform();
    }
    std::sort(props.begin(), props.end(), [](const Proposal& a, const Proposal& b) { return a.mark < b.mark; });

    std::vector<double> coords;
    if (r == 0.0)
    {
        for (const auto& p : props)
        {
            coords.push_back(p.x);
            coords.push_back(p.y);
        }
        return PointPattern(2, std::move(coords), w);
    }

    const double cell = std::max(r, 2.0 * half_width / 2048.0);
    detail::BucketGrid grid(half_width, cell, false);
    const long reach = static_cast<long>(std::ceil(r / grid.cell_size()));
    const double r2 = r * r;
    for (const auto& p : props)
    {
        const long cx = grid.cell_of(p.x);
        const long cy = grid.cell_of(p.y);
        bool blocked = false;
        for (long ring = 0; ring <= reach && !blocked; ++ring)
            grid.visit_ring(cx, cy, ring, [&](std::size_t id) {
                const double dx = coords[2 * id] - p.x;
                const double dy = coords[2 * id + 1] - p.y;
                if (dx * dx + dy * dy < r2)
                    blocked = true;
            });
        if (blocked)
            continue;
        grid.insert(coords.size() / 2, p.x, p.y);
        coords.push_back(p.x);
        coords.push_back(p.y);
    }
    return PointPattern(2, std::move(coords), w);
}

// ---------------------------------------------------------------------------
// Simulation specification
// ---------------------------------------------------------------------------

enum class SimVariant
{
    poisson,
    cloaked_lattice,
    matched,
    rsa
};

inline std::string to_string(SimVariant v)
{
    switch (v)
    {
    case SimVariant::poisson: return "poisson";
    case SimVariant::cloaked_lattice: return "cloaked";
    case SimVariant::matched: return "matched";
    case SimVariant::rsa: return "rsa";
    }
    return "unknown";
}

inline SimVariant sim_variant_from_string(const std::string& s)
{
    if (s == "poisson")
        return SimVariant::poisson;
    if (s == "cloaked" || s == "cloaked_lattice")
        return SimVariant::cloaked_lattice;
    if (s == "matched")
        return SimVariant::matched;
    if (s == "rsa")
        return SimVariant::rsa;
    throw DomainError("unknown simulation variant '" + s + "'");
}

struct SimSpec
{
    SimVariant variant = SimVariant::poisson;
    double lambda = 1.0;      ///< Poisson intensity, lambda_p or lambda_prop
    double alpha = 1.0;       ///< cloaked lattice exponent
    double sigma = 0.25;      ///< cloaked lattice displacement scale
    double radius = 1.0;      ///< RSA hard-core distance
    double half_width = 25.0;
    std::uint64_t seed = 0;
};

inline PointPattern simulate(const SimSpec& s)
{
    switch (s.variant)
    {
    case SimVariant::poisson: return poisson(s.lambda, s.half_width, s.seed);
    case SimVariant::cloaked_lattice: return cloaked_lattice(s.alpha, s.sigma, s.half_width, s.seed);
    case SimVariant::matched: return matched_process(s.lambda, s.half_width, s.seed);
    case SimVariant::rsa: return rsa(s.lambda, s.radius, s.half_width, s.seed);
    }
    throw DomainError("simulate: unknown variant");
}

} // namespace hyperu
