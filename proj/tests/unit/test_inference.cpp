#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include <hyperu/inference.hpp>

using namespace hyperu;

namespace {

CovBlockMatrix identity_matrix(std::size_t n_tapers, std::size_t n_scales)
{
    CovBlockMatrix m;
    m.indices.assign(n_tapers, TaperIndex(1, 0));
    m.scales.resize(n_scales);
    const auto n = static_cast<Eigen::Index>(n_tapers * n_scales);
    m.values = Eigen::MatrixXd::Identity(n, n);
    m.parity_mask.assign(n_tapers * n_tapers, 0);
    return m;
}

double sample_variance(const std::vector<double>& v)
{
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

} // namespace

TEST(Quantile, LinearInterpolation)
{
    const std::vector<double> v = {4.0, 1.0, 3.0, 2.0, 5.0};
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.1), 1.4);
    EXPECT_DOUBLE_EQ(quantile(v, 0.975), 4.9);
    EXPECT_THROW(quantile(v, 0.0), DomainError);
    EXPECT_THROW(quantile(v, 1.0), DomainError);
    EXPECT_THROW(quantile(std::vector<double>{}, 0.5), EmptyInput);
}

TEST(Quantile, MonotoneInLevel)
{
    std::vector<double> v(101);
    for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = std::sin(static_cast<double>(k) * 1.7);
    double prev = -INFINITY;
    for (double q = 0.01; q < 1.0; q += 0.01)
    {
        const double x = quantile(v, q);
        EXPECT_GE(x, prev);
        prev = x;
    }
}

TEST(SampleZ, IdentityVarianceIsTrigammaOfHalfTaperCount)
{
    // With Sigma = I, sum_i N_i^2 is chi-squared with |I| degrees of freedom and
    // Var[log chi^2_k] = trigamma(k / 2).
    const std::size_t nt = 12;
    const auto plan = default_scale_plan(0.3, 0.9, 10);
    const auto z = sample_Z(identity_matrix(nt, plan.size()), plan, 100000, 7);
    const double expected = plan.sum_squared_weights() * trigamma(0.5 * static_cast<double>(nt));
    EXPECT_NEAR(sample_variance(z.values), expected, 0.03 * expected);
    // Centred weights: E[Z] = sum w_j E[log chi^2] = 0.
    const double mean = std::accumulate(z.values.begin(), z.values.end(), 0.0) / static_cast<double>(z.count());
    EXPECT_NEAR(mean, 0.0, 5.0 * std::sqrt(expected / static_cast<double>(z.count())));
}

TEST(SampleZ, InvariantUnderCovarianceScaling)
{
    const auto set = build_taper_set(2, 4);
    const auto plan = default_scale_plan(0.35, 0.95, 8);
    auto m = sigma_transient(set, plan.scales, 0.8, 25.0);
    const auto z1 = sample_Z(m, plan, 4000, 11);
    m.values *= 3.7;
    const auto z2 = sample_Z(m, plan, 4000, 11);
    ASSERT_EQ(z1.count(), z2.count());
    for (std::size_t k = 0; k < z1.count(); ++k)
        ASSERT_NEAR(z1.values[k], z2.values[k], 1e-10) << k;
}

TEST(SampleZ, DeterministicAndChecksShapes)
{
    const auto plan = default_scale_plan(0.3, 0.9, 4);
    const auto m = identity_matrix(3, 4);
    EXPECT_EQ(sample_Z(m, plan, 1000, 1).values, sample_Z(m, plan, 1000, 1).values);
    EXPECT_THROW(sample_Z(m, plan, 0, 1), DomainError);
    EXPECT_THROW(sample_Z(identity_matrix(3, 5), plan, 10, 1), DomainError);
}

TEST(Interval, FormulaFromPivotSample)
{
    ZSample z;
    z.values = {-1.0, -0.5, 0.0, 0.5, 1.0};
    z.beta = 0.5;
    const double r = 20.0;
    const auto ci = interval_from_sample(0.7, z, 0.5, r);
    EXPECT_NEAR(ci.lo, 0.7 - quantile(z, 0.75) / std::log(r), 1e-15);
    EXPECT_NEAR(ci.hi, 0.7 - quantile(z, 0.25) / std::log(r), 1e-15);
    EXPECT_TRUE(ci.nonempty);
    EXPECT_DOUBLE_EQ(ci.level, 0.5);
    EXPECT_THROW(interval_from_sample(0.7, z, 1.5, r), DomainError);
    EXPECT_THROW(interval_from_sample(0.7, z, 0.05, 1.0), WindowTooSmall);
}

TEST(Interval, NestedInLevelAndCentredNearEstimate)
{
    const auto set = build_taper_set(2, 4);
    const auto p = cloaked_lattice(0.5, 0.15, 15.0, 3);
    EstimatorConfig cfg;
    cfg.n_scales = 12;
    const auto rep = estimate_pattern(p, set, cfg);
    const auto narrow = confidence_interval(rep, set, 0.2, 5000, 4);
    const auto wide = confidence_interval(rep, set, 0.05, 5000, 4);
    EXPECT_LE(wide.lo, narrow.lo);
    EXPECT_GE(wide.hi, narrow.hi);
    EXPECT_TRUE(wide.contains(rep.alpha_hat));
    EXPECT_DOUBLE_EQ(wide.beta, std::max(rep.alpha_hat, 0.0));
}

TEST(Interval, EmptyPatternGivesEmptyInterval)
{
    const auto set = build_taper_set(2, 4);
    const auto rep = estimate_pattern(PointPattern(2, Window(10.0)), set);
    const auto ci = confidence_interval(rep, set, 0.05);
    EXPECT_FALSE(ci.nonempty);
    EXPECT_EQ(ci.lo, 0.0);
    EXPECT_EQ(ci.hi, 0.0);
}

TEST(Interval, RejectsMismatchedTaperSet)
{
    const auto set = build_taper_set(2, 4);
    const auto other = build_taper_set(2, 5);
    const auto rep = estimate_pattern(poisson(1.0, 10.0, std::uint64_t{2}), set);
    EXPECT_THROW(confidence_interval(rep, other, 0.05, 100), DomainError);
}

TEST(Interval, ReducedPresetForPattern)
{
    const auto p = cloaked_lattice(1.0, 0.25, 15.0, 5);
    const TaperPreset base;
    const auto main = estimate_pattern(p, build_taper_set(base));
    IntervalOptions opt;
    opt.draws = 2000;
    const auto pi = interval_for_pattern(p, main, base, opt);
    EXPECT_EQ(pi.basis.n_tapers, 12u);
    EXPECT_EQ(pi.basis.plan.size(), kReducedScaleCount);
    EXPECT_DOUBLE_EQ(pi.basis.j_min, main.j_min);
    EXPECT_DOUBLE_EQ(pi.basis.j_max, main.j_max);
    EXPECT_TRUE(pi.ci.contains(pi.basis.alpha_hat));
}

TEST(Coverage, SmallStudyIsAFraction)
{
    SimSpec spec;
    spec.variant = SimVariant::cloaked_lattice;
    spec.alpha = 0.5;
    spec.sigma = 0.15;
    spec.half_width = 12.0;
    spec.seed = 9;
    IntervalOptions opt;
    opt.draws = 1000;
    const auto res = coverage_study(spec, 0.5, 4, TaperPreset{}, opt);
    EXPECT_EQ(res.replicates, 4u);
    EXPECT_LE(res.covered, 4u);
    EXPECT_GE(res.rate(), 0.0);
    EXPECT_LE(res.rate(), 1.0);
    EXPECT_EQ(res.intervals.size(), 4u);
    for (const auto& ci : res.intervals)
        EXPECT_DOUBLE_EQ(ci.beta, 0.5);
    const auto again = coverage_study(spec, 0.5, 4, TaperPreset{}, opt);
    EXPECT_EQ(res.estimates, again.estimates);
    EXPECT_THROW(coverage_study(spec, 0.5, 0, TaperPreset{}, opt), DomainError);
}
