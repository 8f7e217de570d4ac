#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <hyperu/numerics.hpp>

using namespace hyperu;

namespace {

// Orthonormal Hermite polynomial p_n with h_n(y) = p_n(y) exp(-y^2/2).
double hermite_poly_ref(int n, double y)
{
    double p0 = std::pow(std::numbers::pi, -0.25);
    if (n == 0)
        return p0;
    double p1 = std::sqrt(2.0) * y * p0;
    for (int k = 1; k < n; ++k)
    {
        const double p2 = std::sqrt(2.0 / (k + 1)) * y * p1 - std::sqrt(static_cast<double>(k) / (k + 1)) * p0;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

double eval_coeffs(const std::vector<SignedLogValue>& c, double y)
{
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;)
        acc = acc * y + c[k].value();
    return acc;
}

// Scale of the terms being summed, which bounds the cancellation error.
double term_scale(const std::vector<SignedLogValue>& c, double y)
{
    double acc = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k)
        acc += std::abs(c[k].value()) * std::pow(std::abs(y), static_cast<double>(k));
    return acc;
}

Eigen::MatrixXd random_psd(int n, int rank, unsigned seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(n, rank);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < rank; ++j)
            a(i, j) = nd(gen);
    return a * a.transpose();
}

} // namespace

TEST(SignedLog, RoundTripAndProducts)
{
    // Exponentiating a stored logarithm of size L costs about L ulps.
    for (double v : {-3.5, -1e-300, 0.0, 2.0, 1e300})
        EXPECT_NEAR(SignedLogValue::from(v).value(), v, 1e-13 * std::abs(v));
    const auto p = SignedLogValue::from(-2.0) * SignedLogValue::from(3.0);
    EXPECT_DOUBLE_EQ(p.value(), -6.0);
    EXPECT_TRUE((SignedLogValue::from(0.0) * SignedLogValue::from(5.0)).is_zero());
    EXPECT_THROW(SignedLogValue::from(1.0) / SignedLogValue::from(0.0), DomainError);
}

TEST(SignedLog, SumMatchesDirectAndSurvivesHugeMagnitudes)
{
    std::vector<SignedLogValue> terms;
    double direct = 0.0;
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int k = 0; k < 50; ++k)
    {
        const double v = u(gen);
        direct += v;
        terms.push_back(SignedLogValue::from(v));
    }
    EXPECT_NEAR(signed_log_sum(terms).value(), direct, 1e-12);

    // exp(800) overflows a double, the log representation does not.
    std::vector<SignedLogValue> big = {SignedLogValue::from_log(1, 800.0), SignedLogValue::from_log(1, 800.0 + std::log(3.0))};
    const auto s = signed_log_sum(big);
    EXPECT_EQ(s.sign, 1);
    EXPECT_NEAR(s.log_magnitude, 800.0 + std::log(4.0), 1e-12);

    std::vector<SignedLogValue> cancel = {SignedLogValue::from(1.5), SignedLogValue::from(-1.5)};
    EXPECT_TRUE(signed_log_sum(cancel).is_zero());
}

TEST(LogGamma, AgreesWithStd)
{
    for (double z : {0.5, 1.0, 3.25, 17.0, 120.5})
        EXPECT_NEAR(log_gamma(z), std::lgamma(z), 1e-12 * std::max(1.0, std::abs(std::lgamma(z))));
}

TEST(Trigamma, KnownValues)
{
    const double pi2 = std::numbers::pi * std::numbers::pi;
    EXPECT_NEAR(trigamma(1.0), pi2 / 6.0, 1e-14);
    EXPECT_NEAR(trigamma(0.5), pi2 / 2.0, 1e-14);
    EXPECT_NEAR(trigamma(2), pi2 / 6.0 - 1.0, 1e-14);
    EXPECT_THROW(trigamma(0), DomainError);
}

TEST(Trigamma, RecurrenceProperty)
{
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.05, 60.0);
    for (int k = 0; k < 200; ++k)
    {
        const double x = u(gen);
        const double lhs = trigamma(x);
        const double rhs = trigamma(x + 1.0) + 1.0 / (x * x);
        EXPECT_NEAR(lhs, rhs, 1e-14 * std::max(1.0, lhs)) << "x = " << x;
    }
}

TEST(AngularMoment, MatchesTrapezoid)
{
    // The periodic trapezoid rule with 256 nodes is exact for these trigonometric polynomials.
    constexpr int kNodes = 256;
    for (int p = 0; p <= 16; ++p)
        for (int q = 0; q <= 16; ++q)
        {
            double sum = 0.0;
            for (int k = 0; k < kNodes; ++k)
            {
                const double th = 2.0 * std::numbers::pi * k / kNodes;
                sum += std::pow(std::cos(th), p) * std::pow(std::sin(th), q);
            }
            const double ref = sum * 2.0 * std::numbers::pi / kNodes;
            EXPECT_NEAR(angular_moment(p, q), ref, 1e-10) << p << "," << q;
        }
    EXPECT_DOUBLE_EQ(angular_moment(0, 0), 2.0 * std::numbers::pi);
    EXPECT_EQ(angular_moment(3, 2), 0.0);
    EXPECT_THROW(angular_moment(-1, 2), DomainError);
}

TEST(HermiteCoeffs, MatchRecurrence)
{
    for (int n = 0; n <= 20; ++n)
    {
        const auto c = hermite_coeffs(n);
        ASSERT_EQ(c.size(), static_cast<std::size_t>(n) + 1);
        for (std::size_t k = 0; k < c.size(); ++k)
            if ((static_cast<int>(k) - n) % 2 != 0)
                EXPECT_TRUE(c[k].is_zero());
        for (double y = -3.0; y <= 3.0; y += 0.125)
        {
            const double ref = hermite_poly_ref(n, y);
            EXPECT_NEAR(eval_coeffs(c, y), ref, 1e-13 * std::max(1.0, term_scale(c, y))) << "n=" << n << " y=" << y;
        }
    }
    EXPECT_THROW(hermite_coeffs(kMaxHermiteOrder + 1), OverflowError);
    EXPECT_THROW(hermite_coeffs(-1), DomainError);
}

TEST(Quadrature, GaussianIntegrals)
{
    auto g = [](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x)
            r2 += v * v;
        return std::exp(-r2);
    };
    EXPECT_NEAR(quad_radial(g, 1), std::sqrt(std::numbers::pi), 1e-10);
    EXPECT_NEAR(quad_radial(g, 2), std::numbers::pi, 1e-10);

    auto aniso = [](std::span<const double> x) { return x[0] * x[0] * std::exp(-x[0] * x[0] - 4.0 * x[1] * x[1]); };
    EXPECT_NEAR(quad_radial(aniso, 2), 0.5 * std::sqrt(std::numbers::pi) * std::sqrt(std::numbers::pi / 4.0), 1e-10);
}

TEST(PsdFactor, ReconstructsAndIsSymmetric)
{
    for (int rank : {3, 10, 20})
    {
        const auto m = random_psd(20, rank, 11u + static_cast<unsigned>(rank));
        const auto f = psd_factor(m);
        EXPECT_EQ(f.rank, rank);
        EXPECT_LT((f.reconstruct() - m).norm() / m.norm(), 1e-8);
        EXPECT_LT((f.factor - f.factor.transpose()).norm(), 1e-10 * f.factor.norm());
    }
}

TEST(PsdFactor, ClipsRoundOffRejectsIndefinite)
{
    Eigen::MatrixXd m = random_psd(8, 4, 5);
    const double top = m.norm();
    Eigen::MatrixXd tiny = m;
    tiny -= 1e-12 * top * Eigen::MatrixXd::Identity(8, 8);
    const auto f = psd_factor(tiny);
    EXPECT_LT(f.min_eigenvalue, 0.0);
    EXPECT_LT((f.reconstruct() - m).norm() / top, 1e-8);

    Eigen::MatrixXd bad = m - 0.1 * top * Eigen::MatrixXd::Identity(8, 8);
    EXPECT_THROW(psd_factor(bad), NotPsd);
    EXPECT_THROW(psd_factor(Eigen::MatrixXd(2, 3)), DomainError);
}

TEST(MvnSample, CovarianceAndDeterminism)
{
    Eigen::MatrixXd m(3, 3);
    m << 2.0, 0.6, 0.0, 0.6, 1.0, -0.3, 0.0, -0.3, 0.5;
    const auto f = psd_factor(m);
    const Eigen::Index n = 200000;
    const auto x = mvn_sample(f, n, 42);
    ASSERT_EQ(x.cols(), n);
    const Eigen::MatrixXd cov = x * x.transpose() / static_cast<double>(n);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
        {
            const double se = std::sqrt((m(i, i) * m(j, j) + m(i, j) * m(i, j)) / static_cast<double>(n));
            EXPECT_NEAR(cov(i, j), m(i, j), 5.0 * se);
        }
    EXPECT_EQ(mvn_sample(f, 1000, 42), mvn_sample(f, 1000, 42));
    EXPECT_NE(mvn_sample(f, 1000, 42), mvn_sample(f, 1000, 43));
}

TEST(MvnSample, IndependentOfThreadCount)
{
    const auto f = psd_factor(random_psd(6, 6, 9));
    ::setenv("HYPERU_THREADS", "1", 1);
    const auto a = mvn_sample(f, 3000, 5);
    ::setenv("HYPERU_THREADS", "4", 1);
    const auto b = mvn_sample(f, 3000, 5);
    ::unsetenv("HYPERU_THREADS");
    EXPECT_EQ(a, b);
}
