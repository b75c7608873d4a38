#include "lidbench/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lidbench/error.hpp"

using namespace lidbench;

TEST(PiecewiseLinear, InterpolatesAndClamps) {
    const PiecewiseLinear f({{0.2, 1.0}, {0.6, 0.0}, {1.0, 0.5}});
    EXPECT_DOUBLE_EQ(f(0.0), 1.0);
    EXPECT_DOUBLE_EQ(f(0.2), 1.0);
    EXPECT_DOUBLE_EQ(f(0.4), 0.5);
    EXPECT_DOUBLE_EQ(f(0.8), 0.25);
    EXPECT_DOUBLE_EQ(f(3.0), 0.5);
    EXPECT_DOUBLE_EQ(PiecewiseLinear::constant(0.7)(42.0), 0.7);
}

TEST(PiecewiseLinear, RejectsBadKnots) {
    EXPECT_THROW(PiecewiseLinear({{0.0, 1.0}}), ParameterError);
    EXPECT_THROW(PiecewiseLinear({{0.5, 1.0}, {0.5, 2.0}}), ParameterError);
    EXPECT_THROW(PiecewiseLinear({{0.5, 1.0}, {0.1, 2.0}}), ParameterError);
}

TEST(PiecewiseLinear, JsonForms) {
    const PiecewiseLinear f({{0.0, 1.0}, {1.0, 2.0}});
    const nlohmann::json j = f;
    EXPECT_EQ(j, nlohmann::json::parse("[[0.0,1.0],[1.0,2.0]]"));
    EXPECT_EQ(j.get<PiecewiseLinear>(), f);
    EXPECT_DOUBLE_EQ(nlohmann::json(0.25).get<PiecewiseLinear>()(9.0), 0.25);
}

TEST(Stats, MeanAndRmse) {
    const double a[] = {1.0, 2.0, 3.0};
    const double b[] = {1.0, 4.0, 3.0};
    EXPECT_DOUBLE_EQ(mean(a), 2.0);
    EXPECT_DOUBLE_EQ(rmse(a, b), std::sqrt(4.0 / 3.0));
    EXPECT_THROW(rmse(std::span<const double>(a, 2), b), ParameterError);
}

TEST(Stats, BootstrapStddevNearBinomial) {
    std::vector<bool> outcomes(400, false);
    for (std::size_t i = 0; i < 120; ++i) outcomes[i * 3] = true;  // 30%
    const double sd = bootstrap_stddev(outcomes, 2000, 1);
    const double binomial = 100.0 * std::sqrt(0.3 * 0.7 / 400.0);
    EXPECT_NEAR(sd, binomial, 0.15 * binomial);
    EXPECT_DOUBLE_EQ(bootstrap_stddev(std::vector<bool>(50, true), 100, 1), 0.0);
}

TEST(Stats, BootstrapIgnoresOrder) {
    std::vector<bool> a{true, false, false, true, true, false, false, false};
    std::vector<bool> b(a.rbegin(), a.rend());
    EXPECT_DOUBLE_EQ(bootstrap_stddev(a, 500, 9), bootstrap_stddev(b, 500, 9));
}

TEST(Stats, AverageRanksAndSpearman) {
    const double v[] = {10.0, 20.0, 20.0, 5.0};
    EXPECT_EQ(average_ranks(v), (std::vector<double>{2.0, 3.5, 3.5, 1.0}));
    const double x[] = {1, 2, 3, 4, 5};
    const double up[] = {2, 4, 9, 10, 50};
    const double down[] = {5, 4, 3, 2, 1};
    const double flat[] = {1, 1, 1, 1, 1};
    EXPECT_DOUBLE_EQ(spearman(x, up), 1.0);
    EXPECT_DOUBLE_EQ(spearman(x, down), -1.0);
    EXPECT_DOUBLE_EQ(spearman(x, flat), 0.0);
}
