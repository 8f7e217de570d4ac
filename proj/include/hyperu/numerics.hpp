#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace hyperu {

// ---------------------------------------------------------------------------
// Signed values stored as (sign, log|x|)
// ---------------------------------------------------------------------------

struct SignedLogValue
{
    int sign = 0;                    ///< -1, 0 or +1; 0 means the value is exactly zero
    long double log_magnitude = 0.0; ///< extended so exp() keeps full double precision; ignored when sign == 0

    static SignedLogValue from(double v)
    {
        if (v == 0.0)
            return {};
        return {v > 0.0 ? 1 : -1, std::log(static_cast<long double>(std::abs(v)))};
    }

    static SignedLogValue from_log(int sign, long double log_magnitude)
    {
        if (sign == 0)
            return {};
        return {sign > 0 ? 1 : -1, log_magnitude};
    }

    double value() const { return sign == 0 ? 0.0 : static_cast<double>(sign * std::exp(log_magnitude)); }
    bool is_zero() const { return sign == 0; }

    friend SignedLogValue operator*(SignedLogValue a, SignedLogValue b)
    {
        if (a.sign == 0 || b.sign == 0)
            return {};
        return {a.sign * b.sign, a.log_magnitude + b.log_magnitude};
    }

    friend SignedLogValue operator/(SignedLogValue a, SignedLogValue b)
    {
        if (b.sign == 0)
            throw DomainError("SignedLogValue: division by zero");
        if (a.sign == 0)
            return {};
        return {a.sign * b.sign, a.log_magnitude - b.log_magnitude};
    }
};

/*! Sum of signed log-space terms.
 *
 *  Terms are rescaled by the largest magnitude and added with Neumaier
 *  compensation, so the result neither overflows nor loses the small
 *  terms to the ordering of the input.
 */
inline SignedLogValue signed_log_sum(std::span<const SignedLogValue> terms)
{
    long double max_log = -std::numeric_limits<long double>::infinity();
    for (const auto& t : terms)
        if (t.sign != 0)
            max_log = std::max(max_log, t.log_magnitude);
    if (!std::isfinite(max_log))
        return {};

    double sum = 0.0;
    double carry = 0.0;
    for (const auto& t : terms)
    {
        if (t.sign == 0)
            continue;
        const double x = static_cast<double>(t.sign * std::exp(t.log_magnitude - max_log));
        const double s = sum + x;
        carry += std::abs(sum) >= std::abs(x) ? (sum - s) + x : (x - s) + sum;
        sum = s;
    }
    sum += carry;
    if (sum == 0.0)
        return {};
    return {sum > 0.0 ? 1 : -1, std::log(static_cast<long double>(std::abs(sum))) + max_log};
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

inline double log_gamma(double z)
{
    if (!(z > 0.0))
        throw DomainError("log_gamma: argument must be positive, got " + std::to_string(z));
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(z, &sign);
#else
    return std::lgamma(z);
#endif
}

/// Trigamma function (second derivative of log Gamma) for real x > 0.
inline double trigamma(double x)
{
    if (!(x > 0.0))
        throw DomainError("trigamma: argument must be positive, got " + std::to_string(x));

    // Shift up with psi1(x) = psi1(x + 1) + 1/x^2, then use the asymptotic series.
    constexpr double kShift = 20.0;
    double head = 0.0;
    std::vector<double> shifts;
    while (x < kShift)
    {
        shifts.push_back(1.0 / (x * x));
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}
    const double series =
        inv2 * (1.0 / 6.0 +
                inv2 * (-1.0 / 30.0 +
                        inv2 * (1.0 / 42.0 +
                                inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0 + inv2 * (-691.0 / 2730.0 + inv2 * (7.0 / 6.0)))))));
    double tail = inv + 0.5 * inv2 + inv * series;
    for (auto it = shifts.rbegin(); it != shifts.rend(); ++it)
        head += *it;
    return tail + head;
}

inline double trigamma(int m)
{
    if (m < 1)
        throw DomainError("trigamma: integer argument must be >= 1, got " + std::to_string(m));
    return trigamma(static_cast<double>(m));
}

/*! B(p, q) = integral over [0, 2 pi) of cos^p sin^q.
 *
 *  Zero unless both exponents are even. Reduced with
 *  B(p, q) = (p-1)(q-1) / ((p+q)(p+q-2)) B(p-2, q-2) down to
 *  B(0, n) = B(n, 0) = 2 pi prod_{l=1}^{n/2} (1 - 1/(2l)).
 */
inline double angular_moment(int p, int q)
{
    if (p < 0 || q < 0)
        throw DomainError("angular_moment: exponents must be non-negative");
    if ((p & 1) || (q & 1))
        return 0.0;
    double factor = 1.0;
    while (p >= 2 && q >= 2)
    {
        factor *= static_cast<double>((p - 1) * (q - 1)) / static_cast<double>((p + q) * (p + q - 2));
        p -= 2;
        q -= 2;
    }
    const int n = std::max(p, q);
    double base = 2.0 * std::numbers::pi;
    for (int l = 1; l <= n / 2; ++l)
        base *= 1.0 - 1.0 / (2.0 * l);
    return factor * base;
}

inline constexpr int kMaxHermiteOrder = 64;

/*! Monomial coefficients of the L2-normalised Hermite polynomial H_n.
 *
 *  H_n(y) = (2^n n! sqrt(pi))^{-1/2} n! sum_m (-1)^m (2y)^{n-2m} / (m! (n-2m)!),
 *  so entry k of the result is the coefficient of y^k; entries with
 *  k != n (mod 2) are exactly zero.
 */
inline std::vector<SignedLogValue> hermite_coeffs(int n)
{
    if (n < 0)
        throw DomainError("hermite_coeffs: order must be non-negative");
    if (n > kMaxHermiteOrder)
        throw OverflowError("hermite_coeffs: order " + std::to_string(n) + " exceeds " +
                            std::to_string(kMaxHermiteOrder));
    // Extended precision: the magnitudes reach 1e30 and Horner evaluation
    // amplifies their relative error.
    const long double ln2 = std::numbers::ln2_v<long double>;
    const auto lfact = [](int m) { return std::lgamma(static_cast<long double>(m) + 1.0L); };
    const long double log_norm = -0.5L * (n * ln2 + lfact(n) + 0.5L * std::log(std::numbers::pi_v<long double>));
    std::vector<SignedLogValue> coeffs(static_cast<std::size_t>(n) + 1);
    for (int m = 0; 2 * m <= n; ++m)
    {
        const int k = n - 2 * m;
        const long double log_mag = lfact(n) + k * ln2 - lfact(m) - lfact(k) + log_norm;
        coeffs[static_cast<std::size_t>(k)] = SignedLogValue::from_log((m & 1) ? -1 : 1, log_mag);
    }
    return coeffs;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct QuadOptions
{
    double tol = 1e-9;          ///< absolute error target
    double length_scale = 1.0;  ///< typical radius of the integrand's mass
    unsigned max_depth = 24;    ///< bisection budget of the radial rule
};

/*! Integral over R^d (d = 1 or 2) of a smooth integrand with Gaussian decay.
 *
 *  d = 2 uses polar coordinates: adaptive Gauss-Kronrod in the radius on
 *  the mapped half line, periodic trapezoid in the angle (doubled until
 *  stable). d = 1 folds the line onto [0, inf). Throws NoConvergence when
 *  the estimated absolute error exceeds tol.
 */
inline double quad_radial(const std::function<double(std::span<const double>)>& integrand, int d,
                          QuadOptions opt = {})
{
    using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double inf = std::numeric_limits<double>::infinity();
    const double s = opt.length_scale;
    const double rel = std::min(1e-11, opt.tol);
    double error = 0.0;
    double value = 0.0;

    if (d == 1)
    {
        auto folded = [&](double u) {
            const double x[1] = {s * u};
            const double y[1] = {-s * u};
            return s * (integrand(std::span<const double>(x, 1)) + integrand(std::span<const double>(y, 1)));
        };
        value = Rule::integrate(folded, 0.0, inf, opt.max_depth, rel, &error);
    }
    else if (d == 2)
    {
        auto angular = [&](double r) {
            int n = 64;
            double prev = 0.0;
            double current = 0.0;
            for (;;)
            {
                double acc = 0.0;
                const double step = 2.0 * std::numbers::pi / n;
                for (int k = 0; k < n; ++k)
                {
                    const double x[2] = {r * std::cos(k * step), r * std::sin(k * step)};
                    acc += integrand(std::span<const double>(x, 2));
                }
                current = acc * step;
                if (n > 64 && std::abs(current - prev) <= 1e-3 * opt.tol + 1e-14 * std::abs(current))
                    return current;
                if (n >= 16384)
                    throw NoConvergence("quad_radial: angular rule did not stabilise");
                prev = current;
                n *= 2;
            }
        };
        auto radial = [&](double u) {
            const double r = s * u;
            return s * r * angular(r);
        };
        value = Rule::integrate(radial, 0.0, inf, opt.max_depth, rel, &error);
    }
    else
    {
        throw DomainError("quad_radial: only d = 1 and d = 2 are supported");
    }

    if (!std::isfinite(value) || error > opt.tol)
        throw NoConvergence("quad_radial: error estimate " + std::to_string(error) + " exceeds tolerance " +
                            std::to_string(opt.tol));
    return value;
}

// ---------------------------------------------------------------------------
// Positive semidefinite factorisation and Gaussian sampling
// ---------------------------------------------------------------------------

struct PsdFactor
{
    Eigen::MatrixXd factor;      ///< symmetric S with S S^T equal to the clipped input
    Eigen::Index rank = 0;       ///< number of eigenvalues kept
    double min_eigenvalue = 0.0; ///< smallest eigenvalue before clipping
    double max_eigenvalue = 0.0;

    Eigen::Index dimension() const { return factor.rows(); }
    Eigen::MatrixXd reconstruct() const { return factor * factor.transpose(); }
};

/*! Symmetric square root of a positive semidefinite matrix.
 *
 *  The input is rejected with NotPsd when its most negative eigenvalue is
 *  below -rel_tol times the largest. Eigenvalues under keep_tol times the
 *  largest are then treated as zero.
 *
 *  The symmetric root V sqrt(D) V^T does not depend on the basis chosen
 *  inside repeated eigenspaces, so it moves continuously with the input;
 *  an eigenvector factor would not, and Gaussian draws from c * M would no
 *  longer be sqrt(c) times the draws from M.
 */
inline PsdFactor psd_factor(const Eigen::MatrixXd& m, double rel_tol = 1e-8, double keep_tol = 1e-10)
{
    if (m.rows() != m.cols())
        throw DomainError("psd_factor: matrix must be square");
    const Eigen::Index n = m.rows();
    PsdFactor out;
    if (n == 0)
        return out;

    const double scale = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
        throw DomainError("psd_factor: matrix is not symmetric");
    if (scale == 0.0)
    {
        out.factor = Eigen::MatrixXd::Zero(n, n);
        return out;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success)
        throw NoConvergence("psd_factor: eigendecomposition failed");
    const Eigen::VectorXd& values = eig.eigenvalues(); // ascending
    out.min_eigenvalue = values(0);
    out.max_eigenvalue = values(n - 1);
    if (out.min_eigenvalue < -rel_tol * std::max(out.max_eigenvalue, 0.0))
        throw NotPsd("psd_factor: eigenvalue " + std::to_string(out.min_eigenvalue) + " below tolerance (max " +
                     std::to_string(out.max_eigenvalue) + ")");

    const double floor = keep_tol * out.max_eigenvalue;
    Eigen::VectorXd root(n);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        root(k) = values(k) > floor ? std::sqrt(values(k)) : 0.0;
        if (root(k) > 0.0)
            ++out.rank;
    }
    const Eigen::MatrixXd& v = eig.eigenvectors();
    out.factor = v * root.asDiagonal() * v.transpose();
    return out;
}

inline constexpr Eigen::Index kSampleBlock = 512;

/*! Calls sink(first_draw, block) for consecutive blocks of Gaussian draws.
 *
 *  Each block is a (dimension x block_size) matrix whose columns are
 *  independent N(0, S S^T) vectors. Block b uses its own substream of
 *  seed, so the draws do not depend on how blocks are scheduled.
 */
template <typename Sink>
void for_each_gaussian_block(const PsdFactor& f, Eigen::Index count, std::uint64_t seed, Sink&& sink)
{
    const Eigen::Index n = f.dimension();
    const Eigen::Index blocks = (count + kSampleBlock - 1) / kSampleBlock;
    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
        const Eigen::Index first = static_cast<Eigen::Index>(b) * kSampleBlock;
        const Eigen::Index size = std::min(kSampleBlock, count - first);
        Rng rng = Rng::substream(seed, b);
        Eigen::MatrixXd z(n, size);
        for (Eigen::Index c = 0; c < size; ++c)
            for (Eigen::Index r = 0; r < n; ++r)
                z(r, c) = rng.normal();
        const Eigen::MatrixXd draws = f.factor * z;
        sink(first, draws);
    });
}

/// count draws of N(0, S S^T), one per column; deterministic for a given seed.
inline Eigen::MatrixXd mvn_sample(const PsdFactor& f, Eigen::Index count, std::uint64_t seed)
{
    if (count < 1)
        throw DomainError("mvn_sample: count must be >= 1");
    Eigen::MatrixXd out(f.dimension(), count);
    for_each_gaussian_block(f, count, seed, [&](Eigen::Index first, const Eigen::MatrixXd& block) {
        out.middleCols(first, block.cols()) = block;
    });
    return out;
}

} // namespace hyperu
