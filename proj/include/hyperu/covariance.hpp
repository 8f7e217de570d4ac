#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "tapers.hpp"

namespace hyperu {

/*! Covariance of the normalised transforms for a taper set and scale list.
 *
 *  Row/column of taper i at scale index s is s * n_tapers + i. The entries
 *  are those of the unscaled Hermite wavelets; the spatial taper scale c
 *  multiplies every entry by taper_scale_factor = c^(beta - d), kept
 *  separate because the CI pivot does not depend on it.
 */
struct CovBlockMatrix
{
    Eigen::MatrixXd values;
    std::vector<TaperIndex> indices;
    std::vector<double> scales;
    double beta = 0.0;
    double half_width = std::numeric_limits<double>::infinity(); ///< infinity marks the asymptotic matrix
    double taper_scale_factor = 1.0;
    std::vector<std::uint8_t> parity_mask; ///< n_tapers^2 flags, 1 where the entry is structurally zero

    std::size_t n_tapers() const { return indices.size(); }
    std::size_t n_scales() const { return scales.size(); }
    Eigen::Index dimension() const { return values.rows(); }
    bool asymptotic() const { return std::isinf(half_width); }

    Eigen::Index index(std::size_t taper, std::size_t scale) const
    {
        return static_cast<Eigen::Index>(scale * indices.size() + taper);
    }
    double operator()(std::size_t i1, std::size_t s1, std::size_t i2, std::size_t s2) const
    {
        return values(index(i1, s1), index(i2, s2));
    }
    bool structural_zero(std::size_t i1, std::size_t i2) const { return parity_mask[i1 * indices.size() + i2] != 0; }

    /// Fraction of entries that vanish by the parity rule.
    double structural_zero_fraction() const
    {
        if (parity_mask.empty())
            return 0.0;
        const auto zeros = std::count(parity_mask.begin(), parity_mask.end(), std::uint8_t{1});
        return static_cast<double>(zeros) / static_cast<double>(parity_mask.size());
    }
};

/// Entries vanish when some coordinate order differs in parity.
inline bool parity_mismatch(const TaperIndex& a, const TaperIndex& b)
{
    for (int l = 0; l < a.dim; ++l)
        if ((a[l] - b[l]) & 1)
            return true;
    return false;
}

inline constexpr int kMaxCovarianceOrder = 32;

namespace detail {

/*! Degree-sum table of one taper pair in d = 2.
 *
 *  In polar coordinates the product H_{a1}(a k_1) H_{a2}(a k_2) H_{b1}(b k_1) H_{b2}(b k_2)
 *  expands into monomials r^{L1 + L2} cos^{l1 + l2} sin^{m1 + m2}, with
 *  L1 = l1 + m1 the degree from the first taper and L2 = l2 + m2 from the
 *  second. After the angular integral only (L1, L2) matter, so the
 *  coefficient products times B(l1 + l2, m1 + m2) are summed per (L1, L2).
 *
 *  The published statement writes the complex phase with powers indexed by
 *  |l_1|_1 and |l_2|_1; the phase used here is i^{|i2|} (-i)^{|i1|}, which is
 *  what the Fourier eigenvalue relation gives and what quadrature confirms.
 */
struct PairTable
{
    struct Term
    {
        int l1;
        int l2;
        SignedLogValue coefficient;
    };
    std::vector<Term> terms;
    int sign = 0; ///< (-1)^{(|i2| - |i1|)/2}; 0 for a parity mismatch
};

/// log B(p, q) for even p, q with p + q <= size; grows on demand, one copy per thread.
struct AngularTable
{
    int size = -1;
    std::vector<double> values;

    double at(int p, int q) const { return values[static_cast<std::size_t>(p * (size + 1) + q)]; }
};

inline const AngularTable& log_angular_table(int max_degree)
{
    static thread_local AngularTable table;
    if (table.size < max_degree)
    {
        table.size = max_degree;
        const int n = max_degree + 1;
        table.values.assign(static_cast<std::size_t>(n * n), -std::numeric_limits<double>::infinity());
        for (int p = 0; p <= max_degree; p += 2)
            for (int q = 0; q + p <= max_degree; q += 2)
                table.values[static_cast<std::size_t>(p * n + q)] = std::log(angular_moment(p, q));
    }
    return table;
}

inline PairTable pair_table(const TaperIndex& i1, const TaperIndex& i2)
{
    if (i1.dim != 2 || i2.dim != 2)
        throw DomainError("sigma_entry_d2: taper indices must be two-dimensional");
    if (i1.max_order() > kMaxCovarianceOrder || i2.max_order() > kMaxCovarianceOrder)
        throw OverflowError("sigma_entry_d2: taper orders above " + std::to_string(kMaxCovarianceOrder) +
                            " exceed the log-space budget");
    PairTable out;
    if (parity_mismatch(i1, i2))
        return out;
    const int diff = i2.total_order() - i1.total_order();
    out.sign = ((diff / 2) & 1) ? -1 : 1;

    const auto c11 = hermite_coeffs(i1[0]);
    const auto c12 = hermite_coeffs(i1[1]);
    const auto c21 = hermite_coeffs(i2[0]);
    const auto c22 = hermite_coeffs(i2[1]);
    const int max_degree = i1.total_order() + i2.total_order();
    const auto& log_b = log_angular_table(max_degree);

    for (int big1 = 0; big1 <= i1.total_order(); ++big1)
        for (int big2 = 0; big2 <= i2.total_order(); ++big2)
        {
            std::vector<SignedLogValue> parts;
            for (int l1 = 0; l1 <= i1[0]; ++l1)
            {
                const int m1 = big1 - l1;
                if (m1 < 0 || m1 > i1[1])
                    continue;
                const auto a = c11[static_cast<std::size_t>(l1)] * c12[static_cast<std::size_t>(m1)];
                if (a.is_zero())
                    continue;
                for (int l2 = 0; l2 <= i2[0]; ++l2)
                {
                    const int m2 = big2 - l2;
                    if (m2 < 0 || m2 > i2[1])
                        continue;
                    const int p = l1 + l2;
                    const int q = m1 + m2;
                    if ((p & 1) || (q & 1))
                        continue;
                    const auto b = c21[static_cast<std::size_t>(l2)] * c22[static_cast<std::size_t>(m2)];
                    if (b.is_zero())
                        continue;
                    parts.push_back(a * b * SignedLogValue::from_log(1, log_b.at(p, q)));
                }
            }
            const auto total = signed_log_sum(parts);
            if (!total.is_zero())
                out.terms.push_back({big1, big2, total});
        }
    return out;
}

/// log cosh(t) without overflow.
inline double log_cosh(double t)
{
    const double a = std::abs(t);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

/*! Entry for unscaled tapers with t = (j1 - j2) log R.
 *
 *  With a = R^{j1}, b = R^{j2}, m = (a^2 + b^2) / 2, u = a / sqrt(m), v = b / sqrt(m):
 *  sign / 2 * (ab / m)^{(beta+2)/2} * sum_{L1,L2} T[L1][L2] Gamma((L1 + L2 + beta + 2)/2) u^L1 v^L2,
 *  and ab / m = 1 / cosh(t).
 */
inline double evaluate_pair(const PairTable& table, double t, double beta, std::span<const double> log_gamma_by_degree,
                            std::vector<SignedLogValue>& scratch)
{
    if (table.sign == 0 || table.terms.empty())
        return 0.0;
    const double lc = log_cosh(t);
    const double log_u = 0.5 * t - 0.5 * lc;
    const double log_v = -0.5 * t - 0.5 * lc;
    scratch.clear();
    for (const auto& term : table.terms)
        scratch.push_back(term.coefficient * SignedLogValue::from_log(1, log_gamma_by_degree[static_cast<std::size_t>(term.l1 + term.l2)] +
                                                                          term.l1 * log_u + term.l2 * log_v));
    const auto sum = signed_log_sum(scratch);
    if (sum.is_zero())
        return 0.0;
    const double log_prefix = -std::numbers::ln2 - 0.5 * (beta + 2.0) * lc;
    return table.sign * sum.sign * static_cast<double>(std::exp(sum.log_magnitude + log_prefix));
}

inline std::vector<double> log_gamma_table(int max_degree, double beta, int dim)
{
    std::vector<double> out(static_cast<std::size_t>(max_degree) + 1);
    for (int l = 0; l <= max_degree; ++l)
        out[static_cast<std::size_t>(l)] = log_gamma(0.5 * (l + beta + dim));
    return out;
}

/// d = 1 entry by quadrature: (1/cosh t)^{(beta+1)/2} * integral h_{n1}(u y) h_{n2}(v y) |y|^beta dy, times the phase.
inline double entry_d1(int n1, int n2, double t, double beta)
{
    if ((n1 - n2) & 1)
        return 0.0;
    const int sign = (((n2 - n1) / 2) & 1) ? -1 : 1;
    const double lc = log_cosh(t);
    const double u = std::exp(0.5 * t - 0.5 * lc);
    const double v = std::exp(-0.5 * t - 0.5 * lc);
    auto integrand = [&](std::span<const double> y) {
        const double r = std::abs(y[0]);
        const double w = beta == 0.0 ? 1.0 : std::pow(r, beta);
        return hermite_function(n1, u * y[0]) * hermite_function(n2, v * y[0]) * w;
    };
    QuadOptions opt;
    opt.tol = 1e-10;
    const double integral = quad_radial(integrand, 1, opt);
    return sign * std::exp(-0.5 * (beta + 1.0) * lc) * integral;
}

inline void check_beta(double beta)
{
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw DomainError("covariance: beta must be finite and non-negative");
}

} // namespace detail

/*! One transient covariance entry for unscaled two-dimensional Hermite tapers:
 *  R^{(beta+2)(j1+j2)/2} * integral F[psi_i1](R^j1 k) conj(F[psi_i2](R^j2 k)) |k|^beta dk.
 *
 *  R = 1 with j1 = j2 gives the pure integral used by the asymptotic matrix.
 */
inline double sigma_entry_d2(const TaperIndex& i1, const TaperIndex& i2, double j1, double j2, double beta, double half_width)
{
    detail::check_beta(beta);
    if (!(half_width >= 1.0))
        throw DomainError("sigma_entry_d2: R must be at least 1");
    const auto table = detail::pair_table(i1, i2);
    const auto lg = detail::log_gamma_table(i1.total_order() + i2.total_order(), beta, 2);
    std::vector<SignedLogValue> scratch;
    return detail::evaluate_pair(table, (j1 - j2) * std::log(half_width), beta, lg, scratch);
}

/// Same entry for d = 1 tapers, by quadrature.
inline double sigma_entry_d1(int n1, int n2, double j1, double j2, double beta, double half_width)
{
    detail::check_beta(beta);
    if (!(half_width >= 1.0))
        throw DomainError("sigma_entry_d1: R must be at least 1");
    return detail::entry_d1(n1, n2, (j1 - j2) * std::log(half_width), beta);
}

namespace detail {

/// Everything but the values.
inline CovBlockMatrix covariance_shell(const TaperSet& set, std::span<const double> scales, double beta,
                                       double half_width, bool block_diagonal)
{
    check_beta(beta);
    if (set.dim != 1 && set.dim != 2)
        throw DomainError("covariance: only d = 1 and d = 2 are supported");
    if (scales.empty())
        throw DegenerateScales("covariance: empty scale list");

    CovBlockMatrix m;
    m.indices = set.indices;
    m.scales.assign(scales.begin(), scales.end());
    m.beta = beta;
    m.half_width = block_diagonal ? std::numeric_limits<double>::infinity() : half_width;
    m.taper_scale_factor = std::pow(set.scale, beta - set.dim);
    const std::size_t nt = set.size();
    m.parity_mask.assign(nt * nt, 0);
    for (std::size_t a = 0; a < nt; ++a)
        for (std::size_t b = 0; b < nt; ++b)
            m.parity_mask[a * nt + b] = parity_mismatch(set.indices[a], set.indices[b]) ? 1 : 0;
    return m;
}

inline CovBlockMatrix assemble_covariance(const TaperSet& set, std::span<const double> scales, double beta,
                                          double half_width, bool block_diagonal)
{
    CovBlockMatrix m = covariance_shell(set, scales, beta, half_width, block_diagonal);
    const std::size_t nt = set.size();
    const std::size_t ns = scales.size();
    const Eigen::Index n = static_cast<Eigen::Index>(nt * ns);
    m.values = Eigen::MatrixXd::Zero(n, n);
    const double log_r = block_diagonal ? 0.0 : std::log(half_width);

    // Pair tables depend only on the taper pair.
    std::vector<PairTable> tables;
    std::vector<double> lg;
    if (set.dim == 2)
    {
        tables.resize(nt * nt);
        parallel_for(nt * nt, [&](std::size_t k) {
            const std::size_t a = k / nt;
            const std::size_t b = k % nt;
            if (a <= b && !m.parity_mask[k])
                tables[k] = pair_table(set.indices[a], set.indices[b]);
        });
        lg = log_gamma_table(4 * set.i_max, beta, 2);
    }

    // Blocks (s1, s2) with s1 <= s2; entries below the diagonal of a
    // diagonal block are mirrored, never recomputed.
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    for (std::size_t s1 = 0; s1 < ns; ++s1)
        for (std::size_t s2 = s1; s2 < ns; ++s2)
            if (!block_diagonal || s1 == s2)
                blocks.emplace_back(s1, s2);

    auto entry = [&](std::size_t a, std::size_t b, double t, std::vector<SignedLogValue>& scratch) -> double {
        if (m.parity_mask[a * nt + b])
            return 0.0;
        if (set.dim == 1)
            return entry_d1(set.indices[a][0], set.indices[b][0], t, beta);
        if (a <= b)
            return evaluate_pair(tables[a * nt + b], t, beta, lg, scratch);
        // Swap roles: entry(a, b, t) = entry(b, a, -t).
        return evaluate_pair(tables[b * nt + a], -t, beta, lg, scratch);
    };

    parallel_for(blocks.size(), [&](std::size_t k) {
        const auto [s1, s2] = blocks[k];
        const double t = (scales[s1] - scales[s2]) * log_r;
        std::vector<SignedLogValue> scratch;
        for (std::size_t a = 0; a < nt; ++a)
            for (std::size_t b = (s1 == s2 ? a : 0); b < nt; ++b)
            {
                const double v = entry(a, b, t, scratch);
                const Eigen::Index r = m.index(a, s1);
                const Eigen::Index c = m.index(b, s2);
                m.values(r, c) = v;
                m.values(c, r) = v;
            }
    });
    return m;
}

} // namespace detail

/// Transient matrix Sigma_R(beta) over all (taper, scale) pairs.
inline CovBlockMatrix sigma_transient(const TaperSet& set, std::span<const double> scales, double beta, double half_width)
{
    if (!(half_width > 1.0))
        throw WindowTooSmall("sigma_transient: R must exceed 1");
    return detail::assemble_covariance(set, scales, beta, half_width, false);
}

/// Asymptotic matrix Sigma(alpha): block diagonal in the scales.
inline CovBlockMatrix sigma_asymptotic(const TaperSet& set, std::span<const double> scales, double alpha)
{
    return detail::assemble_covariance(set, scales, alpha, 1.0, true);
}

// ---------------------------------------------------------------------------
// On-disk cache
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s)
    {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline double round_to(double v, double step) { return std::round(v / step) * step; }

inline std::string cache_key(const TaperSet& set, std::span<const double> scales, double beta, double half_width)
{
    std::ostringstream key;
    key.precision(17);
    key << "d=" << set.dim << ";imax=" << set.i_max << ";c=" << set.scale << ";n=" << set.size() << ";beta=" << beta
        << ";R=" << half_width << ";J=";
    for (double j : scales)
        key << j << ',';
    return key.str();
}

inline constexpr char kCacheMagic[8] = {'H', 'Y', 'P', 'C', 'O', 'V', '0', '1'};

} // namespace detail

/*! Sigma_R through a directory cache.
 *
 *  beta and R are rounded to 1e-3 before assembly, so a cache hit returns
 *  exactly what a fresh computation would. The key also covers the taper
 *  preset and the full scale list.
 */
inline CovBlockMatrix sigma_transient_cached(const TaperSet& set, std::span<const double> scales, double beta,
                                             double half_width, const std::filesystem::path& dir)
{
    const double b = detail::round_to(beta, 1e-3);
    const double r = detail::round_to(half_width, 1e-3);
    const std::string key = detail::cache_key(set, scales, b, r);
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.cov", static_cast<unsigned long long>(detail::fnv1a(key)));
    const auto path = dir / name;

    {
        std::ifstream in(path, std::ios::binary);
        char magic[8] = {};
        std::uint64_t key_size = 0;
        std::int64_t n = 0;
        in.read(magic, 8);
        in.read(reinterpret_cast<char*>(&key_size), sizeof key_size);
        if (in && std::memcmp(magic, detail::kCacheMagic, 8) == 0 && key_size == key.size())
        {
            std::string stored(key_size, '\0');
            in.read(stored.data(), static_cast<std::streamsize>(key_size));
            in.read(reinterpret_cast<char*>(&n), sizeof n);
            if (in && stored == key && n == static_cast<std::int64_t>(set.size() * scales.size()))
            {
                CovBlockMatrix m = detail::covariance_shell(set, scales, b, r, false);
                m.values.resize(n, n);
                in.read(reinterpret_cast<char*>(m.values.data()), static_cast<std::streamsize>(sizeof(double) * n * n));
                if (in)
                    return m;
            }
        }
    }

    CovBlockMatrix m = sigma_transient(set, scales, b, r);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (out)
    {
        const std::uint64_t key_size = key.size();
        const std::int64_t n = m.dimension();
        out.write(detail::kCacheMagic, 8);
        out.write(reinterpret_cast<const char*>(&key_size), sizeof key_size);
        out.write(key.data(), static_cast<std::streamsize>(key_size));
        out.write(reinterpret_cast<const char*>(&n), sizeof n);
        out.write(reinterpret_cast<const char*>(m.values.data()), static_cast<std::streamsize>(sizeof(double) * n * n));
    }
    return m;
}

} // namespace hyperu
