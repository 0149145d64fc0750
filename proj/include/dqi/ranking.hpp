#pragma once

// Rank assembly and validation: integer ranks, the 2:1 combined indicator
// (COI), Spearman correlation against the true relative improvement (TRI),
// top/bottom-half selection, and the meta-return payoff.
//
// Rank convention throughout: ascending ranks 0..n-1, rank n-1 = highest
// indicator value = best.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dqi/core.hpp"

namespace dqi {

struct IndicatorRecord {
    std::string name;
    double eri = 0.0;
    double eas = 0.0;
    std::optional<double> coverage;
    std::optional<double> tri;
    std::optional<double> r_algo;
};

struct RankedValues {
    std::vector<int> ranks;
    bool had_ties = false;
};

/// TRI = (r_algo - mean) / mean, both floor-normalized with the same floor.
inline double tri(double r_algo_norm, double mean_data_return_norm) {
    if (!(mean_data_return_norm > 0.0)) {
        throw Error("tri: mean normalized data return must be > 0");
    }
    return (r_algo_norm - mean_data_return_norm) / mean_data_return_norm;
}

/// Ascending ranks 0..n-1; rank n-1 = highest value. Exact value ties are
/// broken by lexicographic name (earlier name = lower rank) and flagged.
inline RankedValues rank_values(const std::vector<double>& values,
                                const std::vector<std::string>& names) {
    const std::size_t n = values.size();
    if (n < 1) throw Error("rank_values: empty input");
    if (!names.empty() && names.size() != n) {
        throw Error("rank_values: names/values length mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(values[i])) {
            throw Error("rank_values: non-finite value at index " + std::to_string(i));
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        if (!names.empty() && names[a] != names[b]) return names[a] < names[b];
        return a < b;
    });
    RankedValues out;
    out.ranks.resize(n);
    for (std::size_t r = 0; r < n; ++r) out.ranks[order[r]] = static_cast<int>(r);
    for (std::size_t r = 1; r < n; ++r) {
        if (values[order[r]] == values[order[r - 1]]) out.had_ties = true;
    }
    return out;
}

inline RankedValues rank_values(const std::vector<double>& values) {
    return rank_values(values, {});
}

namespace detail {

inline void check_permutation(const std::vector<int>& ranks, const std::string& what) {
    const std::size_t n = ranks.size();
    std::vector<bool> seen(n, false);
    for (int r : ranks) {
        if (r < 0 || static_cast<std::size_t>(r) >= n || seen[static_cast<std::size_t>(r)]) {
            throw Error(what + ": ranks are not a permutation of 0.." + std::to_string(n - 1));
        }
        seen[static_cast<std::size_t>(r)] = true;
    }
}

}  // namespace detail

/// COI: score_i = 2*eri_rank_i + eas_rank_i, re-ranked ascending. Score ties
/// go to the dataset with the higher EAS rank, then lexicographic name.
inline std::vector<int> coi_combine(const std::vector<int>& eri_ranks,
                                    const std::vector<int>& eas_ranks,
                                    const std::vector<std::string>& names = {}) {
    const std::size_t n = eri_ranks.size();
    if (eas_ranks.size() != n) throw Error("coi_combine: rank vector length mismatch");
    if (!names.empty() && names.size() != n) throw Error("coi_combine: names length mismatch");
    detail::check_permutation(eri_ranks, "coi_combine eri");
    detail::check_permutation(eas_ranks, "coi_combine eas");

    std::vector<int> score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = 2 * eri_ranks[i] + eas_ranks[i];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] < score[b];
        if (eas_ranks[a] != eas_ranks[b]) return eas_ranks[a] < eas_ranks[b];
        if (!names.empty() && names[a] != names[b]) return names[a] < names[b];
        return a < b;
    });
    std::vector<int> coi(n);
    for (std::size_t r = 0; r < n; ++r) coi[order[r]] = static_cast<int>(r);
    return coi;
}

/// Spearman's rho for tie-free permutations: 1 - 6*sum(d^2) / (n(n^2-1)).
inline double spearman_rho(const std::vector<int>& ranks_a, const std::vector<int>& ranks_b) {
    const std::size_t n = ranks_a.size();
    if (ranks_b.size() != n) throw Error("spearman_rho: length mismatch");
    if (n < 2) throw Error("spearman_rho: need at least 2 entries");
    detail::check_permutation(ranks_a, "spearman_rho a");
    detail::check_permutation(ranks_b, "spearman_rho b");
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(ranks_a[i]) - static_cast<double>(ranks_b[i]);
        d2 += d * d;
    }
    const double nn = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

struct HalfSplit {
    std::vector<bool> reference_top;  // TRI half membership
    std::vector<bool> candidate_top;  // COI half membership
    std::vector<bool> correct;        // halves agree
    int hits = 0;
    double fraction_correct = 0.0;
};

/// Splits by rank into a bottom and top half (the top half has ceil(n/2)
/// members for odd n) and flags where the candidate half matches the
/// reference half.
inline HalfSplit half_split(const std::vector<int>& candidate_ranks,
                            const std::vector<int>& reference_ranks) {
    const std::size_t n = candidate_ranks.size();
    if (reference_ranks.size() != n) throw Error("half_split: length mismatch");
    detail::check_permutation(candidate_ranks, "half_split candidate");
    detail::check_permutation(reference_ranks, "half_split reference");
    const int threshold = static_cast<int>(n / 2);  // top = ranks >= floor(n/2)
    HalfSplit out;
    out.reference_top.resize(n);
    out.candidate_top.resize(n);
    out.correct.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.reference_top[i] = reference_ranks[i] >= threshold;
        out.candidate_top[i] = candidate_ranks[i] >= threshold;
        out.correct[i] = out.reference_top[i] == out.candidate_top[i];
        if (out.correct[i]) ++out.hits;
    }
    out.fraction_correct = static_cast<double>(out.hits) / static_cast<double>(n);
    return out;
}

/// Discounted payoff of working a dataset: sum_{t=0}^{H} gamma^t * delta_r
/// minus the deployment and fixed costs.
inline double meta_return(double delta_r, double deploy_cost, double fixed_cost,
                          std::int64_t horizon, double discount) {
    if (horizon < 0) throw Error("meta_return: horizon must be >= 0");
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw Error("meta_return: discount must lie in (0, 1]");
    }
    double annuity;
    if (discount == 1.0) {
        annuity = static_cast<double>(horizon + 1);
    } else {
        annuity = (1.0 - std::pow(discount, static_cast<double>(horizon + 1))) / (1.0 - discount);
    }
    return annuity * delta_r - (deploy_cost + fixed_cost);
}

/// Compresses a rank subset back to a permutation of 0..m-1, preserving
/// order. Used when correlations are recomputed over a subset of datasets.
inline std::vector<int> renumber_ranks(const std::vector<int>& ranks) {
    std::vector<int> sorted(ranks);
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> out(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), ranks[i]);
        out[i] = static_cast<int>(it - sorted.begin());
    }
    return out;
}

/// Ranks for a set of datasets plus, when ground truth is available, the
/// TRI column, Spearman coefficients against it, and half-split flags.
/// Indicator values are absent when the table was built from rank fixtures.
struct RankTable {
    std::vector<std::string> names;
    std::vector<int> eri_rank, eas_rank, coi_rank;
    std::optional<std::vector<double>> eri_values, eas_values;
    std::optional<std::vector<double>> tri_values;
    std::optional<std::vector<int>> tri_rank;
    std::optional<double> rho_eri_tri, rho_eas_tri, rho_coi_tri;
    std::optional<HalfSplit> split_eri, split_eas, split_coi;
    bool eri_ties = false, eas_ties = false, tri_ties = false;

    std::size_t size() const { return names.size(); }
};

namespace detail {

inline void require_unique_names(const std::vector<std::string>& names) {
    std::vector<std::string> sorted(names);
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) throw Error("duplicate dataset name: " + *dup);
}

// Fills correlations and half-split flags once tri_rank is present.
inline void finish_against_truth(RankTable& t) {
    if (!t.tri_rank) return;
    t.rho_eri_tri = spearman_rho(t.eri_rank, *t.tri_rank);
    t.rho_eas_tri = spearman_rho(t.eas_rank, *t.tri_rank);
    t.rho_coi_tri = spearman_rho(t.coi_rank, *t.tri_rank);
    t.split_eri = half_split(t.eri_rank, *t.tri_rank);
    t.split_eas = half_split(t.eas_rank, *t.tri_rank);
    t.split_coi = half_split(t.coi_rank, *t.tri_rank);
}

}  // namespace detail

/// Builds the full table from indicator values. Records must either all
/// carry tri or none. Requires >= 2 datasets with unique names.
inline RankTable build_rank_table(const std::vector<IndicatorRecord>& records) {
    if (records.size() < 2) throw Error("ranking requires >= 2 datasets");
    RankTable t;
    for (const auto& r : records) t.names.push_back(r.name);
    detail::require_unique_names(t.names);

    std::vector<double> eri, eas;
    for (const auto& r : records) {
        eri.push_back(r.eri);
        eas.push_back(r.eas);
    }
    auto re = rank_values(eri, t.names);
    auto ra = rank_values(eas, t.names);
    t.eri_rank = re.ranks;
    t.eas_rank = ra.ranks;
    t.eri_ties = re.had_ties;
    t.eas_ties = ra.had_ties;
    t.coi_rank = coi_combine(t.eri_rank, t.eas_rank, t.names);
    t.eri_values = std::move(eri);
    t.eas_values = std::move(eas);

    const std::size_t with_tri = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const IndicatorRecord& r) {
            return r.tri.has_value();
        }));
    if (with_tri == records.size()) {
        std::vector<double> tri;
        for (const auto& r : records) tri.push_back(*r.tri);
        auto rt = rank_values(tri, t.names);
        t.tri_rank = rt.ranks;
        t.tri_ties = rt.had_ties;
        t.tri_values = std::move(tri);
        detail::finish_against_truth(t);
    } else if (with_tri != 0) {
        throw Error("ground truth present for only " + std::to_string(with_tri) + " of " +
                    std::to_string(records.size()) + " datasets");
    }
    return t;
}

/// Builds the table from pre-computed rank columns (fixture mode).
inline RankTable build_rank_table_from_ranks(const std::vector<std::string>& names,
                                             const std::vector<int>& eri_ranks,
                                             const std::vector<int>& eas_ranks,
                                             const std::optional<std::vector<int>>& tri_ranks) {
    if (names.size() < 2) throw Error("ranking requires >= 2 datasets");
    if (eri_ranks.size() != names.size() || eas_ranks.size() != names.size() ||
        (tri_ranks && tri_ranks->size() != names.size())) {
        throw Error("rank fixture columns must all have one entry per dataset");
    }
    detail::require_unique_names(names);
    detail::check_permutation(eri_ranks, "eri_rank fixture");
    detail::check_permutation(eas_ranks, "eas_rank fixture");
    RankTable t;
    t.names = names;
    t.eri_rank = eri_ranks;
    t.eas_rank = eas_ranks;
    t.coi_rank = coi_combine(eri_ranks, eas_ranks, names);
    if (tri_ranks) {
        detail::check_permutation(*tri_ranks, "tri_rank fixture");
        t.tri_rank = tri_ranks;
        detail::finish_against_truth(t);
    }
    return t;
}

/// Indices of the top-k datasets by COI, best first. k must lie in [1, n].
inline std::vector<std::size_t> select_top_k(const RankTable& t, std::int64_t k) {
    const auto n = static_cast<std::int64_t>(t.size());
    if (k < 1) throw Error("select: k must be >= 1");
    if (k > n) {
        throw Error("select: k = " + std::to_string(k) + " exceeds dataset count " +
                    std::to_string(n));
    }
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return t.coi_rank[a] > t.coi_rank[b];
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

}  // namespace dqi
