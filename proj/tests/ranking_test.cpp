#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dqi/core.hpp"
#include "dqi/ranking.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

std::vector<std::string> index_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("d" + std::to_string(100 + i));
    return names;
}

TEST(RankValues, MatchesBruteForceOracle) {
    dqi::Rng rng(7);
    for (int c = 0; c < 1000; ++c) {
        const std::size_t n = 1 + rng.below(12);
        const auto names = index_names(n);
        std::vector<double> values(n);
        // Coarse grid so duplicates appear often.
        for (double& v : values) v = static_cast<double>(rng.below(6));
        EXPECT_EQ(dqi::rank_values(values, names).ranks,
                  oracles::brute_force_ranks(values, names));
    }
}

TEST(RankValues, TieBreaksByNameAndFlags) {
    const auto r = dqi::rank_values({1.0, 1.0, 0.5}, {"b", "a", "c"});
    EXPECT_TRUE(r.had_ties);
    EXPECT_EQ(r.ranks, (std::vector<int>{2, 1, 0}));  // "a" before "b" at equal value
    EXPECT_FALSE(dqi::rank_values({1.0, 2.0}, {"a", "b"}).had_ties);
}

TEST(RankValues, RejectsNonFinite) {
    EXPECT_THROW(dqi::rank_values({1.0, std::nan("")}, {"a", "b"}), dqi::Error);
    EXPECT_THROW(dqi::rank_values({}, {}), dqi::Error);
}

TEST(RankValues, InvariantUnderMonotoneTransforms) {
    dqi::Rng rng(8);
    for (int c = 0; c < 1000; ++c) {
        const std::size_t n = 2 + rng.below(10);
        const auto names = index_names(n);
        std::vector<double> values(n);
        for (double& v : values) v = rng.uniform(-3.0, 3.0);
        std::vector<double> mapped(n);
        switch (rng.below(3)) {
            case 0:
                for (std::size_t i = 0; i < n; ++i) mapped[i] = std::exp(values[i]);
                break;
            case 1:
                for (std::size_t i = 0; i < n; ++i) mapped[i] = 2.0 * values[i] + 3.0;
                break;
            default:
                for (std::size_t i = 0; i < n; ++i)
                    mapped[i] = values[i] * values[i] * values[i];
                break;
        }
        EXPECT_EQ(dqi::rank_values(mapped, names).ranks, dqi::rank_values(values, names).ranks);
    }
}

TEST(CoiCombine, WeightsEriTwice) {
    // scores: 2*2+0=4, 2*0+1=1, 2*1+2=4 -> tie on 4 resolved by eas rank
    const auto coi = dqi::coi_combine({2, 0, 1}, {0, 1, 2});
    EXPECT_EQ(coi, (std::vector<int>{1, 0, 2}));
}

TEST(CoiCombine, TieGoesToHigherEasRank) {
    // Both datasets score 2; the one with eas rank 2 wins the higher slot.
    const auto coi = dqi::coi_combine({1, 0, 2}, {0, 2, 1}, {"a", "b", "c"});
    EXPECT_EQ(coi[0], 0);  // score 2, eas 0
    EXPECT_EQ(coi[1], 1);  // score 2, eas 2
    EXPECT_EQ(coi[2], 2);  // score 5
}

TEST(CoiCombine, OutputIsAlwaysAPermutation) {
    dqi::Rng rng(9);
    for (int c = 0; c < 1000; ++c) {
        const std::size_t n = 2 + rng.below(16);
        const auto e = oracles::random_permutation(rng, n);
        const auto a = oracles::random_permutation(rng, n);
        const auto coi = dqi::coi_combine(e, a);
        std::vector<int> sorted(coi);
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(sorted[i], static_cast<int>(i));
    }
}

TEST(CoiCombine, RejectsNonPermutations) {
    EXPECT_THROW(dqi::coi_combine({0, 0}, {0, 1}), dqi::Error);
    EXPECT_THROW(dqi::coi_combine({0, 2}, {0, 1}), dqi::Error);
    EXPECT_THROW(dqi::coi_combine({0, 1}, {0}), dqi::Error);
}

TEST(Spearman, KnownValues) {
    EXPECT_DOUBLE_EQ(dqi::spearman_rho({0, 1, 2, 3}, {0, 1, 2, 3}), 1.0);
    EXPECT_DOUBLE_EQ(dqi::spearman_rho({0, 1, 2, 3}, {3, 2, 1, 0}), -1.0);
    // n=3, d^2 = 0+1+1 -> 1 - 12/24 = 0.5
    EXPECT_DOUBLE_EQ(dqi::spearman_rho({0, 1, 2}, {0, 2, 1}), 0.5);
}

TEST(Spearman, MatchesPearsonOnRanksAndIsSymmetric) {
    dqi::Rng rng(10);
    for (int c = 0; c < 1000; ++c) {
        const std::size_t n = 2 + rng.below(20);
        const auto a = oracles::random_permutation(rng, n);
        const auto b = oracles::random_permutation(rng, n);
        const double rho = dqi::spearman_rho(a, b);
        EXPECT_NEAR(rho, oracles::pearson_on_ranks(a, b), 1e-10);
        EXPECT_DOUBLE_EQ(rho, dqi::spearman_rho(b, a));
        EXPECT_GE(rho, -1.0 - 1e-12);
        EXPECT_LE(rho, 1.0 + 1e-12);
    }
}

TEST(Spearman, Preconditions) {
    EXPECT_THROW(dqi::spearman_rho({0}, {0}), dqi::Error);
    EXPECT_THROW(dqi::spearman_rho({0, 1}, {0, 2}), dqi::Error);
    EXPECT_THROW(dqi::spearman_rho({0, 1}, {0, 1, 2}), dqi::Error);
}

TEST(HalfSplit, CountsAgreement) {
    // candidate top {2,3} vs reference top {1,3}: agree on 3 and 0 only.
    const auto hs = dqi::half_split({0, 1, 2, 3}, {0, 3, 1, 2});
    EXPECT_EQ(hs.hits, 2);
    EXPECT_DOUBLE_EQ(hs.fraction_correct, 0.5);
    EXPECT_TRUE(hs.correct[0]);
    EXPECT_FALSE(hs.correct[1]);
    EXPECT_FALSE(hs.correct[2]);
    EXPECT_TRUE(hs.correct[3]);
}

TEST(HalfSplit, OddCountPutsExtraInTop) {
    const auto hs = dqi::half_split({0, 1, 2, 3, 4}, {0, 1, 2, 3, 4});
    int top = 0;
    for (bool b : hs.candidate_top) top += b ? 1 : 0;
    EXPECT_EQ(top, 3);  // ceil(5/2)
    EXPECT_EQ(hs.hits, 5);
}

TEST(MetaReturn, HandComputedCases) {
    // gamma = 1: (H+1) * dr - costs
    EXPECT_DOUBLE_EQ(dqi::meta_return(0.5, 1.0, 0.25, 3, 1.0), 2.0 - 1.25);
    // gamma = 0.5, H = 1: (1 + 0.5) * dr - costs
    EXPECT_DOUBLE_EQ(dqi::meta_return(2.0, 0.0, 0.0, 1, 0.5), 3.0);
    // H = 0: one period of the improvement
    EXPECT_DOUBLE_EQ(dqi::meta_return(2.0, 1.0, 1.0, 0, 0.9), 0.0);
    EXPECT_THROW(dqi::meta_return(1.0, 0.0, 0.0, -1, 1.0), dqi::Error);
    EXPECT_THROW(dqi::meta_return(1.0, 0.0, 0.0, 1, 0.0), dqi::Error);
}

TEST(Tri, RatioAndPrecondition) {
    EXPECT_DOUBLE_EQ(dqi::tri(6.0, 4.0), 0.5);
    EXPECT_DOUBLE_EQ(dqi::tri(2.0, 4.0), -0.5);
    EXPECT_THROW(dqi::tri(1.0, 0.0), dqi::Error);
}

TEST(RenumberRanks, CompressesSubsets) {
    EXPECT_EQ(dqi::renumber_ranks({7, 2, 9}), (std::vector<int>{1, 0, 2}));
    EXPECT_EQ(dqi::renumber_ranks({0, 1, 2}), (std::vector<int>{0, 1, 2}));
}

TEST(RenumberRanks, AlwaysYieldsOrderPreservingPermutation) {
    dqi::Rng rng(11);
    for (int c = 0; c < 1000; ++c) {
        const std::size_t big = 4 + rng.below(20);
        const auto full = oracles::random_permutation(rng, big);
        const std::size_t keep = 2 + rng.below(big - 2);
        std::vector<int> subset(full.begin(), full.begin() + static_cast<long>(keep));
        const auto out = dqi::renumber_ranks(subset);
        std::vector<int> sorted(out);
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < keep; ++i) ASSERT_EQ(sorted[i], static_cast<int>(i));
        for (std::size_t i = 0; i < keep; ++i) {
            for (std::size_t j = 0; j < keep; ++j) {
                ASSERT_EQ(subset[i] < subset[j], out[i] < out[j]);
            }
        }
    }
}

TEST(RankTable, BuildsFromValuesWithGroundTruth) {
    std::vector<dqi::IndicatorRecord> recs(3);
    recs[0] = {.name = "a", .eri = 0.1, .eas = 0.5, .coverage = {}, .tri = 0.3, .r_algo = {}};
    recs[1] = {.name = "b", .eri = 0.9, .eas = 0.2, .coverage = {}, .tri = 0.9, .r_algo = {}};
    recs[2] = {.name = "c", .eri = 0.4, .eas = 0.8, .coverage = {}, .tri = 0.1, .r_algo = {}};
    const auto t = dqi::build_rank_table(recs);
    EXPECT_EQ(t.eri_rank, (std::vector<int>{0, 2, 1}));
    EXPECT_EQ(t.eas_rank, (std::vector<int>{1, 0, 2}));
    ASSERT_TRUE(t.tri_rank.has_value());
    EXPECT_EQ(*t.tri_rank, (std::vector<int>{1, 2, 0}));
    ASSERT_TRUE(t.rho_eri_tri.has_value());
    EXPECT_NEAR(*t.rho_eri_tri, oracles::pearson_on_ranks(t.eri_rank, *t.tri_rank), 1e-12);
    ASSERT_TRUE(t.split_coi.has_value());
}

TEST(RankTable, RejectsPartialGroundTruthDuplicatesAndSingletons) {
    std::vector<dqi::IndicatorRecord> recs(2);
    recs[0] = {.name = "a", .eri = 0.1, .eas = 0.5, .coverage = {}, .tri = 0.3, .r_algo = {}};
    recs[1] = {.name = "b", .eri = 0.9, .eas = 0.2, .coverage = {}, .tri = {}, .r_algo = {}};
    EXPECT_THROW(dqi::build_rank_table(recs), dqi::Error);
    recs[1].name = "a";
    recs[1].tri = 0.5;
    EXPECT_THROW(dqi::build_rank_table(recs), dqi::Error);
    recs.resize(1);
    try {
        dqi::build_rank_table(recs);
        FAIL() << "expected an error";
    } catch (const dqi::Error& e) {
        EXPECT_NE(std::string(e.what()).find(">= 2 datasets"), std::string::npos);
    }
}

TEST(RankTable, FixtureColumnsRoundTrip) {
    const auto names = fixtures::names(fixtures::kMujoco);
    const auto t = dqi::build_rank_table_from_ranks(
        names, fixtures::column(fixtures::kMujoco, &fixtures::Row::eri),
        fixtures::column(fixtures::kMujoco, &fixtures::Row::eas),
        fixtures::column(fixtures::kMujoco, &fixtures::Row::tri));
    EXPECT_EQ(t.coi_rank, fixtures::column(fixtures::kMujoco, &fixtures::Row::coi));
    // Ground-truth agreement values for this suite, computed from the rank
    // columns: sum(d^2) = 124, 174, 54 over n = 12.
    ASSERT_TRUE(t.rho_eri_tri.has_value());
    EXPECT_NEAR(*t.rho_eri_tri, 1.0 - 6.0 * 124.0 / (12.0 * 143.0), 1e-12);
    EXPECT_NEAR(*t.rho_eas_tri, 1.0 - 6.0 * 174.0 / (12.0 * 143.0), 1e-12);
    EXPECT_NEAR(*t.rho_coi_tri, 1.0 - 6.0 * 54.0 / (12.0 * 143.0), 1e-12);
    EXPECT_EQ(t.split_coi->hits, 10);
}

TEST(SelectTopK, OrdersBestFirst) {
    std::vector<dqi::IndicatorRecord> recs(3);
    recs[0] = {.name = "a", .eri = 0.1, .eas = 0.5, .coverage = {}, .tri = {}, .r_algo = {}};
    recs[1] = {.name = "b", .eri = 0.9, .eas = 0.2, .coverage = {}, .tri = {}, .r_algo = {}};
    recs[2] = {.name = "c", .eri = 0.4, .eas = 0.8, .coverage = {}, .tri = {}, .r_algo = {}};
    const auto t = dqi::build_rank_table(recs);
    const auto top = dqi::select_top_k(t, 3);
    EXPECT_EQ(t.coi_rank[top[0]], 2);
    EXPECT_EQ(t.coi_rank[top[1]], 1);
    EXPECT_EQ(t.coi_rank[top[2]], 0);
    EXPECT_EQ(dqi::select_top_k(t, 1).size(), 1u);
    EXPECT_THROW(dqi::select_top_k(t, 4), dqi::Error);
    EXPECT_THROW(dqi::select_top_k(t, 0), dqi::Error);
}

}  // namespace
