#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <hyperu/simulate.hpp>
#include <hyperu/transforms.hpp>

using namespace hyperu;

namespace {

double hermite_fn_ref(int n, double y)
{
    const double norm = 1.0 / std::sqrt(std::pow(2.0, n) * std::tgamma(n + 1.0) * std::sqrt(std::numbers::pi));
    return norm * std::hermite(static_cast<unsigned>(n), y) * std::exp(-0.5 * y * y);
}

PointPattern shuffled(const PointPattern& p, unsigned seed)
{
    std::vector<std::size_t> idx(p.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
        idx[k] = k;
    std::mt19937 gen(seed);
    std::shuffle(idx.begin(), idx.end(), gen);
    std::vector<double> coords;
    for (auto k : idx)
        coords.insert(coords.end(), p.point(k).begin(), p.point(k).end());
    return PointPattern(p.dim(), coords, p.window());
}

} // namespace

TEST(Transform, MatchesDirectSum)
{
    const auto p = poisson(1.0, 12.0, std::uint64_t{3});
    const auto set = build_taper_set(2, 5);
    const std::vector<double> scales = {0.3, 0.6, 0.95};
    const auto grid = transform_grid(p, set, scales);
    ASSERT_EQ(grid.values.size(), scales.size() * set.size());
    for (std::size_t s = 0; s < scales.size(); ++s)
    {
        const double inv = set.scale / std::pow(12.0, scales[s]);
        for (std::size_t k = 0; k < set.size(); ++k)
        {
            double direct = 0.0;
            for (std::size_t q = 0; q < p.size(); ++q)
            {
                auto x = p.point(q);
                direct += hermite_fn_ref(set.indices[k][0], inv * x[0]) * hermite_fn_ref(set.indices[k][1], inv * x[1]);
            }
            EXPECT_NEAR(grid.at(s, k), direct, 1e-10 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST(Transform, OneDimensional)
{
    const auto set = build_taper_set(1, 6);
    const PointPattern p(1, {-3.0, 0.5, 2.0, 4.5}, Window(5.0));
    const double j = 0.5;
    const double scales[1] = {j};
    const auto grid = transform_grid(p, set, scales);
    const double inv = set.scale / std::pow(5.0, j);
    for (std::size_t k = 0; k < set.size(); ++k)
    {
        double direct = 0.0;
        for (double x : {-3.0, 0.5, 2.0, 4.5})
            direct += hermite_fn_ref(set.indices[k][0], inv * x);
        EXPECT_NEAR(grid.at(0, k), direct, 1e-12);
    }
}

TEST(Transform, PermutationInvariantBitwise)
{
    const auto p = poisson(1.0, 25.0, std::uint64_t{8});
    ASSERT_GT(p.size(), 2 * kReductionBlock);
    const auto set = build_taper_set(2, 4);
    const std::vector<double> scales = {0.4, 0.8};
    const auto a = transform_grid(p, set, scales);
    const auto b = transform_grid(shuffled(p, 1), set, scales);
    EXPECT_EQ(a.values, b.values);
}

TEST(Transform, ThreadCountInvariantBitwise)
{
    const auto p = poisson(1.0, 20.0, std::uint64_t{9});
    const auto set = build_taper_set(2, 4);
    const std::vector<double> scales = {0.2, 0.5, 0.7, 0.9};
    ::setenv("HYPERU_THREADS", "1", 1);
    const auto a = transform_grid(p, set, scales);
    ::setenv("HYPERU_THREADS", "3", 1);
    const auto b = transform_grid(p, set, scales);
    ::unsetenv("HYPERU_THREADS");
    EXPECT_EQ(a.values, b.values);
}

TEST(Transform, SingleEntryAgreesWithGrid)
{
    const auto p = poisson(1.0, 10.0, std::uint64_t{4});
    const auto set = build_taper_set(2, 4);
    const double scales[1] = {0.7};
    const auto grid = transform_grid(p, set, scales);
    for (std::size_t k = 0; k < set.size(); ++k)
        EXPECT_EQ(wavelet_transform(p, set, set.indices[k], 0.7), grid.at(0, k));
    EXPECT_THROW(wavelet_transform(p, set, TaperIndex(2, 2), 0.7), DomainError);
}

TEST(Transform, Errors)
{
    const auto set = build_taper_set(2, 4);
    const PointPattern small(2, {0.1, 0.1}, Window(1.0));
    const double j[1] = {0.5};
    EXPECT_THROW(transform_grid(small, set, j), WindowTooSmall);
    const PointPattern p(2, {0.1, 0.1}, Window(3.0));
    const double bad[1] = {-0.5};
    EXPECT_THROW(transform_grid(p, set, bad), DomainError);
    EXPECT_THROW(transform_grid(PointPattern(1, Window(3.0)), set, j), DomainError);
}

TEST(Transform, PointAtOriginGivesZeroEnergy)
{
    const auto set = build_taper_set(2, 4);
    const PointPattern p(2, {0.0, 0.0}, Window(3.0));
    const double j[1] = {0.5};
    EXPECT_THROW(transform_grid(p, set, j).log_energy(), ZeroTransformSum);
}

TEST(Curve, DefinitionAndGrid)
{
    const auto p = poisson(1.0, 15.0, std::uint64_t{5});
    const auto set = build_taper_set(2, 4);
    const auto grid = diagnostic_grid();
    ASSERT_EQ(grid.size(), 120u);
    EXPECT_NEAR(grid.front(), 0.11, 1e-12);
    EXPECT_NEAR(grid.back(), 1.3, 1e-12);
    const auto c = curve_C(p, set, grid);
    const auto t = transform_grid(p, set, grid);
    for (std::size_t s = 0; s < grid.size(); s += 17)
    {
        double sum = 0.0;
        for (double v : t.row(s))
            sum += v * v;
        EXPECT_NEAR(c.values[s], std::log(sum) / std::log(15.0), 1e-12);
    }
    const std::vector<double> unsorted = {0.5, 0.4};
    EXPECT_THROW(curve_C(p, set, unsorted), DomainError);
}

TEST(Scattering, SinglePointAndZeroFrequency)
{
    const PointPattern p(2, {0.3, -0.2}, Window(2.0));
    const double k[2] = {1.0, 2.0};
    EXPECT_NEAR(scattering_intensity(p, k), 1.0 / 16.0, 1e-15);
    EXPECT_NEAR(scattering_intensity(p, k, 2), 1.0 / 256.0, 1e-15);
    const double zero[2] = {0.0, 0.0};
    EXPECT_THROW(scattering_intensity(p, zero), ZeroFrequency);
}
