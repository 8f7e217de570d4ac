#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include <hyperu/simulate.hpp>

using namespace hyperu;

namespace {

double min_distance(const PointPattern& p)
{
    double best = INFINITY;
    for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t b = a + 1; b < p.size(); ++b)
        {
            const double dx = p.point(a)[0] - p.point(b)[0];
            const double dy = p.point(a)[1] - p.point(b)[1];
            best = std::min(best, std::hypot(dx, dy));
        }
    return best;
}

// Quadratic-time sequential adsorption over the same proposal stream.
std::vector<double> rsa_reference(double lambda, double r, double half_width, std::uint64_t seed)
{
    Rng rng(seed);
    const auto n = rng.poisson(lambda * 4.0 * half_width * half_width);
    struct P
    {
        double mark, x, y;
    };
    std::vector<P> props(n);
    for (auto& p : props)
    {
        p.x = rng.uniform(-half_width, half_width);
        p.y = rng.uniform(-half_width, half_width);
        p.mark = rng.uniform();
    }
    std::sort(props.begin(), props.end(), [](const P& a, const P& b) { return a.mark < b.mark; });
    std::vector<double> kept;
    for (const auto& p : props)
    {
        bool ok = true;
        for (std::size_t k = 0; k < kept.size() && ok; k += 2)
            ok = std::hypot(kept[k] - p.x, kept[k + 1] - p.y) >= r;
        if (ok)
        {
            kept.push_back(p.x);
            kept.push_back(p.y);
        }
    }
    return kept;
}

} // namespace

TEST(Poisson, MeanCountAndDeterminism)
{
    const double lambda = 1.0, r = 10.0;
    const double mean = lambda * 400.0;
    double total = 0.0;
    const int reps = 200;
    for (int k = 0; k < reps; ++k)
    {
        const auto p = poisson(lambda, r, static_cast<std::uint64_t>(k));
        total += static_cast<double>(p.size());
        for (std::size_t q = 0; q < p.size(); ++q)
            ASSERT_TRUE(p.window().contains(p.point(q)));
    }
    EXPECT_NEAR(total / reps, mean, 4.0 * std::sqrt(mean / reps));
    EXPECT_EQ(poisson(1.0, 5.0, std::uint64_t{3}).coords(), poisson(1.0, 5.0, std::uint64_t{3}).coords());
    EXPECT_THROW(poisson(0.0, 5.0, std::uint64_t{3}), DomainError);
    EXPECT_EQ(poisson(2.0, 5.0, std::uint64_t{1}, 1).dim(), 1);
}

TEST(Poisson, CountsAreDispersedLikePoisson)
{
    std::vector<double> counts;
    for (int k = 0; k < 400; ++k)
        counts.push_back(static_cast<double>(poisson(0.5, 6.0, static_cast<std::uint64_t>(1000 + k)).size()));
    const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
    double var = 0.0;
    for (double c : counts)
        var += (c - mean) * (c - mean);
    var /= counts.size() - 1;
    EXPECT_NEAR(var / mean, 1.0, 0.25);
}

TEST(Stable, LaplaceTransform)
{
    Rng rng(17);
    for (double delta : {0.25, 0.5, 0.75})
    {
        std::vector<double> y(50000);
        for (double& v : y)
            v = one_sided_stable(delta, rng);
        for (double s : {0.5, 1.0, 4.0})
        {
            double m = 0.0;
            for (double v : y)
                m += std::exp(-s * v);
            m /= static_cast<double>(y.size());
            EXPECT_NEAR(m, std::exp(-std::pow(s, delta)), 0.01) << "delta=" << delta << " s=" << s;
        }
    }
    EXPECT_THROW(one_sided_stable(1.0, std::uint64_t{1}), DomainError);
    EXPECT_THROW(one_sided_stable(0.0, std::uint64_t{1}), DomainError);
}

TEST(Stable, HalfStableHasLevyClosedForm)
{
    // delta = 1/2 is the Levy law with scale 1/2: P(Y <= y) = erfc(1 / (2 sqrt(y))).
    Rng rng(5);
    const int n = 50000;
    int below = 0;
    for (int k = 0; k < n; ++k)
        below += one_sided_stable(0.5, rng) <= 1.0;
    EXPECT_NEAR(static_cast<double>(below) / n, std::erfc(0.5), 0.01);
}

TEST(Cloaked, CountNearArea)
{
    const auto p = cloaked_lattice(1.0, 0.25, 40.0, 1);
    EXPECT_NEAR(static_cast<double>(p.size()), 6400.0, 4.0 * std::sqrt(4.0 * 80.0 * 0.5));
    const auto q = cloaked_lattice(2.0, 0.0, 10.0, 2);
    // Cloaked lattice without displacement: exactly one point per unit cell on average, and
    // each point stays within its cloaking cell, so the count is close to the area.
    EXPECT_NEAR(static_cast<double>(q.size()), 400.0, 40.0);
    EXPECT_EQ(cloaked_lattice(0.5, 0.15, 10.0, 3).coords(), cloaked_lattice(0.5, 0.15, 10.0, 3).coords());
    EXPECT_THROW(cloaked_lattice(0.0, 0.1, 10.0, 1), DomainError);
    EXPECT_THROW(cloaked_lattice(2.5, 0.1, 10.0, 1), DomainError);
    EXPECT_THROW(cloaked_lattice(1.0, -0.1, 10.0, 1), DomainError);
}

TEST(Cloaked, MarginGrowsWithHeavierTails)
{
    EXPECT_GT(detail::stable_tail_quantile(0.25), detail::stable_tail_quantile(0.75));
    EXPECT_EQ(detail::stable_tail_quantile(1.0), 1.0);
}

TEST(Rsa, MatchesQuadraticReference)
{
    for (std::uint64_t seed : {1u, 2u, 3u})
    {
        const auto p = rsa(3.0, 1.0, 8.0, seed);
        EXPECT_EQ(p.coords(), rsa_reference(3.0, 1.0, 8.0, seed));
    }
}

TEST(Rsa, HardCoreAndDegenerateRadius)
{
    const auto p = rsa(3.0, 1.0, 15.0, 4);
    EXPECT_GE(min_distance(p), 1.0);
    const auto all = rsa(2.0, 0.0, 10.0, 4);
    Rng rng(4);
    EXPECT_EQ(all.size(), rng.poisson(2.0 * 400.0));
    EXPECT_THROW(rsa(1.0, -1.0, 10.0, 1), DomainError);
}

TEST(Matched, OnePointPerLatticeSite)
{
    for (double r : {5.0, 10.0, 12.3})
    {
        const auto p = matched_process(2.0, r, 7);
        const double m = std::round(2.0 * r);
        EXPECT_EQ(static_cast<double>(p.size()), m * m);
    }
    const auto a = matched_process(1.5, 8.0, 3);
    const auto b = matched_process(1.5, 8.0, 3);
    EXPECT_EQ(a.coords(), b.coords());
    EXPECT_THROW(matched_process(1.0, 8.0, 1), DomainError);
}

TEST(Matched, PointsAreDistinct)
{
    const auto p = matched_process(1.2, 8.0, 5);
    EXPECT_GT(min_distance(p), 0.0);
}

TEST(SimSpec, DispatchAndNames)
{
    for (auto v : {SimVariant::poisson, SimVariant::cloaked_lattice, SimVariant::matched, SimVariant::rsa})
        EXPECT_EQ(sim_variant_from_string(to_string(v)), v);
    EXPECT_THROW(sim_variant_from_string("ginibre"), DomainError);
    SimSpec s;
    s.variant = SimVariant::rsa;
    s.lambda = 3.0;
    s.half_width = 6.0;
    s.seed = 2;
    EXPECT_EQ(simulate(s).coords(), rsa(3.0, 1.0, 6.0, 2).coords());
}
