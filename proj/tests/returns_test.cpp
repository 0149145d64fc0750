#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dqi/core.hpp"
#include "dqi/dataset.hpp"
#include "dqi/returns.hpp"

namespace {

TEST(DiscountedReturn, HandComputedCases) {
    EXPECT_DOUBLE_EQ(dqi::discounted_return(std::vector<double>{1, 2, 3}, 0.5),
                     1.0 + 1.0 + 0.75);
    EXPECT_DOUBLE_EQ(dqi::discounted_return(std::vector<double>{1, 2, 3}, 1.0), 6.0);
    EXPECT_DOUBLE_EQ(dqi::discounted_return(std::vector<double>{5}, 0.1), 5.0);
}

TEST(DiscountedReturn, Preconditions) {
    EXPECT_THROW(dqi::discounted_return(std::vector<double>{}, 0.9), dqi::Error);
    EXPECT_THROW(dqi::discounted_return(std::vector<double>{1}, 0.0), dqi::Error);
    EXPECT_THROW(dqi::discounted_return(std::vector<double>{1}, 1.1), dqi::Error);
}

// Power-sum form written independently of the Horner-style accumulation.
double power_sum_return(const std::vector<double>& r, double gamma) {
    double acc = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) acc += std::pow(gamma, double(t)) * r[t];
    return acc;
}

TEST(DiscountedReturn, MatchesPowerSumOracle) {
    dqi::Rng rng(41);
    for (int c = 0; c < 1000; ++c) {
        const std::size_t len = 1 + rng.below(40);
        std::vector<double> r(len);
        for (double& x : r) x = rng.uniform(-5.0, 5.0);
        const double gamma = rng.uniform(0.05, 1.0);
        EXPECT_NEAR(dqi::discounted_return(r, gamma), power_sum_return(r, gamma), 1e-9);
    }
}

TEST(NormalizeReturns, SubtractsFloor) {
    const auto out = dqi::normalize_returns({3.0, 5.0, 4.5}, 3.0);
    EXPECT_DOUBLE_EQ(out[0], 0.0);
    EXPECT_DOUBLE_EQ(out[1], 2.0);
    EXPECT_DOUBLE_EQ(out[2], 1.5);
}

TEST(NormalizeReturns, FloorAboveMinimumNamesTrajectory) {
    try {
        dqi::normalize_returns({3.0, 1.0, 4.0}, 2.0);
        FAIL() << "expected an error";
    } catch (const dqi::Error& e) {
        EXPECT_NE(std::string(e.what()).find("trajectory 1"), std::string::npos) << e.what();
    }
}

TEST(Eri, HandComputedCase) {
    // mean 2, max 4 -> (4 - 2) / 2 = 1
    EXPECT_DOUBLE_EQ(dqi::eri({1.0, 1.0, 4.0, 2.0}), 1.0);
}

TEST(Eri, DegenerateDistribution) {
    EXPECT_THROW(dqi::eri({0.0, 0.0}), dqi::Error);
    EXPECT_THROW(dqi::eri({}), dqi::Error);
}

TEST(Eri, ScaleInvariant) {
    dqi::Rng rng(42);
    for (int c = 0; c < 1000; ++c) {
        const std::size_t len = 2 + rng.below(30);
        std::vector<double> r(len);
        for (double& x : r) x = rng.uniform(0.0, 100.0);
        r[rng.below(len)] += 1.0;  // guarantee a nonzero mean and spread
        const double scale = std::exp(rng.uniform(-6.0, 6.0));
        std::vector<double> scaled(r);
        for (double& x : scaled) x *= scale;
        EXPECT_NEAR(dqi::eri(scaled), dqi::eri(r), 1e-9 * (1.0 + dqi::eri(r)));
    }
}

dqi::Dataset two_trajectory_dataset() {
    dqi::Dataset d;
    d.name = "ret";
    const std::int64_t n = 5;
    d.states.setZero(n, 1);
    d.actions.setZero(n, 1);
    d.next_states.setZero(n, 1);
    d.rewards.resize(n);
    // episode 0: rewards 1, 2 ; episode 1: rewards 3, 1, 1
    d.rewards << 1.0f, 2.0f, 3.0f, 1.0f, 1.0f;
    d.episode_starts = {0, 2};
    d.meta.discount = 1.0;
    return d;
}

TEST(ReturnStats, UsesDeclaredFloor) {
    dqi::Dataset d = two_trajectory_dataset();
    d.meta.return_floor = 1.0;
    const auto stats = dqi::compute_return_stats(d);
    // returns: 3 and 5; normalized: 2 and 4
    EXPECT_FALSE(stats.floor_from_data);
    EXPECT_DOUBLE_EQ(stats.floor, 1.0);
    EXPECT_DOUBLE_EQ(stats.mean_norm, 3.0);
    EXPECT_DOUBLE_EQ(stats.max_norm, 4.0);
    EXPECT_DOUBLE_EQ(stats.eri, (4.0 - 3.0) / 3.0);
}

TEST(ReturnStats, OverrideBeatsDeclaredFloor) {
    dqi::Dataset d = two_trajectory_dataset();
    d.meta.return_floor = 1.0;
    const auto stats = dqi::compute_return_stats(d, 0.0);
    EXPECT_DOUBLE_EQ(stats.floor, 0.0);
    EXPECT_DOUBLE_EQ(stats.mean_norm, 4.0);
}

TEST(ReturnStats, FallsBackToObservedMinimumAndFlagsIt) {
    dqi::Dataset d = two_trajectory_dataset();
    const auto stats = dqi::compute_return_stats(d);
    EXPECT_TRUE(stats.floor_from_data);
    EXPECT_DOUBLE_EQ(stats.floor, 3.0);
    // normalized: 0 and 2
    EXPECT_DOUBLE_EQ(stats.eri, (2.0 - 1.0) / 1.0);
}

TEST(ReturnStats, DiscountOverride) {
    dqi::Dataset d = two_trajectory_dataset();
    d.meta.return_floor = 0.0;
    const auto stats = dqi::compute_return_stats(d, std::nullopt, 0.5);
    // episode 0: 1 + 1 = 2 ; episode 1: 3 + 0.5 + 0.25 = 3.75
    EXPECT_DOUBLE_EQ(stats.returns[0], 2.0);
    EXPECT_DOUBLE_EQ(stats.returns[1], 3.75);
}

TEST(ReturnStats, EqualReturnsWithDataFloorIsDegenerate) {
    dqi::Dataset d = two_trajectory_dataset();
    d.rewards << 1.0f, 2.0f, 2.0f, 0.5f, 0.5f;  // both trajectories return 3
    EXPECT_THROW(dqi::compute_return_stats(d), dqi::Error);
}

}  // namespace
