#pragma once

// Per-trajectory discounted returns, floor normalization, and the estimated
// relative return improvement (ERI) indicator.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "dqi/core.hpp"
#include "dqi/dataset.hpp"

namespace dqi {

struct ReturnStats {
    std::vector<double> returns;             // one discounted return per trajectory
    std::vector<double> normalized_returns;  // returns - floor, all >= 0
    double floor = 0.0;
    bool floor_from_data = false;  // floor fell back to the observed minimum
    double mean_norm = 0.0;
    double max_norm = 0.0;
    double min_raw = 0.0;
    double eri = 0.0;
};

/// Sum of gamma^t * r_t with t starting at 0. Accumulates in double so the
/// result is stable against the float32 storage of rewards.
template <typename Vec>
inline double discounted_return(const Vec& rewards, double discount) {
    if (rewards.size() == 0) throw Error("discounted_return: empty trajectory");
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw Error("discounted_return: discount must lie in (0, 1]");
    }
    double acc = 0.0;
    double g = 1.0;
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(rewards.size()); ++t) {
        acc += g * static_cast<double>(rewards[t]);
        g *= discount;
    }
    return acc;
}

inline double discounted_return(const std::vector<double>& rewards, double discount) {
    return discounted_return(Eigen::Map<const VectorD>(rewards.data(),
                             static_cast<Eigen::Index>(rewards.size())), discount);
}

/// returns - floor, elementwise. The floor must not exceed any observed
/// return; the first offending trajectory is named in the error.
inline std::vector<double> normalize_returns(const std::vector<double>& returns, double floor) {
    std::vector<double> out(returns.size());
    for (std::size_t i = 0; i < returns.size(); ++i) {
        out[i] = returns[i] - floor;
        if (out[i] < 0.0) {
            throw Error("floor above observed minimum: trajectory " + std::to_string(i) +
                        " has return " + std::to_string(returns[i]) + " < floor " +
                        std::to_string(floor));
        }
    }
    return out;
}

/// ERI = (max - mean) / mean over floor-normalized returns.
inline double eri(const std::vector<double>& normalized_returns) {
    if (normalized_returns.empty()) throw Error("eri: no trajectories");
    double sum = 0.0;
    double max = normalized_returns.front();
    for (double r : normalized_returns) {
        sum += r;
        max = std::max(max, r);
    }
    const double mean = sum / static_cast<double>(normalized_returns.size());
    if (!(mean > 0.0)) {
        throw Error("degenerate return distribution: mean normalized return is 0");
    }
    return (max - mean) / mean;
}

/// Full return pipeline for one dataset. `floor_override` wins over the
/// dataset's declared return_floor; with neither, the observed minimum is
/// used and flagged (ERI's denominator then depends on in-sample data).
inline ReturnStats compute_return_stats(const Dataset& d,
                                        std::optional<double> floor_override = std::nullopt,
                                        std::optional<double> discount_override = std::nullopt) {
    const double discount = discount_override.value_or(d.meta.discount);
    ReturnStats stats;
    for (const auto& range : segment_trajectories(d)) {
        stats.returns.push_back(
            discounted_return(d.rewards.segment(range.start, range.length()), discount));
    }
    stats.min_raw = *std::min_element(stats.returns.begin(), stats.returns.end());

    if (floor_override) {
        stats.floor = *floor_override;
    } else if (d.meta.return_floor) {
        stats.floor = *d.meta.return_floor;
    } else {
        stats.floor = stats.min_raw;
        stats.floor_from_data = true;
    }
    stats.normalized_returns = normalize_returns(stats.returns, stats.floor);
    stats.mean_norm = mean_of(stats.normalized_returns);
    stats.max_norm =
        *std::max_element(stats.normalized_returns.begin(), stats.normalized_returns.end());
    stats.eri = eri(stats.normalized_returns);
    return stats;
}

}  // namespace dqi
