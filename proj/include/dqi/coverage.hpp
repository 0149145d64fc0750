#pragma once

// Hypercube state-coverage diagnostic: ratio of the observed state box to
// the declared one. Reported for inspection only; it is never folded into
// COI because it showed no correlation with downstream performance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "dqi/core.hpp"
#include "dqi/dataset.hpp"

namespace dqi {

struct CoverageResult {
    std::vector<double> observed_min, observed_max;
    double log_observed_volume = 0.0;
    double log_full_volume = 0.0;
    double ratio = 0.0;
    std::vector<std::int64_t> degenerate_dims;  // zero declared width, excluded
};

/// Observed-to-declared box volume ratio over state dimensions, accumulated
/// in log space. Observed extremes are taken over states and next_states and
/// clipped to the declared box. Returns nullopt when the dataset declares no
/// state ranges.
inline std::optional<CoverageResult> coverage_ratio(const Dataset& d) {
    if (!d.meta.has_state_ranges()) return std::nullopt;
    const auto& lo = *d.meta.state_min;
    const auto& hi = *d.meta.state_max;
    const std::int64_t dims = d.state_dim();

    CoverageResult out;
    out.observed_min.resize(dims);
    out.observed_max.resize(dims);
    for (std::int64_t k = 0; k < dims; ++k) {
        double mn = static_cast<double>(d.states.col(k).minCoeff());
        double mx = static_cast<double>(d.states.col(k).maxCoeff());
        mn = std::min(mn, static_cast<double>(d.next_states.col(k).minCoeff()));
        mx = std::max(mx, static_cast<double>(d.next_states.col(k).maxCoeff()));
        out.observed_min[k] = mn;
        out.observed_max[k] = mx;

        const double full = hi[k] - lo[k];
        if (!(full > 0.0)) {
            out.degenerate_dims.push_back(k);
            continue;
        }
        out.log_full_volume += std::log(full);
        const double observed = std::clamp(mx, lo[k], hi[k]) - std::clamp(mn, lo[k], hi[k]);
        if (observed <= 0.0) {
            out.log_observed_volume = -std::numeric_limits<double>::infinity();
        } else {
            out.log_observed_volume += std::log(observed);
        }
    }
    out.ratio = std::exp(out.log_observed_volume - out.log_full_volume);
    return out;
}

}  // namespace dqi
