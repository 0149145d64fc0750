#pragma once

// Synthetic dataset generator with known ground truth. Actions are
// tanh(mean_fn(state) + sigma_true * eps) with standard-normal eps, so the
// pre-tanh stochasticity is exactly sigma_true and EAS estimates can be
// validated against it. Dynamics are a bounded linear-Gaussian rule; nothing
// here tries to be a realistic simulator.
//
// Generation is single-threaded and draws from one seeded stream in a fixed
// order, so equal configs produce byte-identical datasets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dqi/core.hpp"
#include "dqi/dataset.hpp"

namespace dqi {

enum class MeanFn { zero, linear, sinusoidal };
enum class RewardFn { action_quadratic, state_linear };

struct SynthConfig {
    std::int64_t state_dim = 3;
    std::int64_t action_dim = 1;
    std::int64_t n_trajectories = 10;
    std::int64_t trajectory_length = 100;
    MeanFn mean_fn = MeanFn::zero;
    double sigma_true = 0.3;  // pre-tanh noise scale
    RewardFn reward_fn = RewardFn::action_quadratic;
    std::uint64_t seed = 0;
    // Mixture mode: trajectories use sigma_true_2 with probability
    // mixture_fraction, modeling data collected by two distinct policies.
    std::optional<double> sigma_true_2;
    double mixture_fraction = 0.5;
    std::string name = "synth";
};

struct SynthGroundTruth {
    double sigma_true = 0.0;
    std::optional<double> sigma_true_2;
    double mixture_fraction = 0.0;
    double empirical_pretanh_std = 0.0;  // rms of (u - mean_fn(s)), pooled
    double empirical_mean_return = 0.0;  // undiscounted, per trajectory
    // Exact expected return, available for the zero-mean / action-quadratic
    // combination where E[r] = -sigma^2 per step.
    std::optional<double> analytic_mean_return;
};

namespace detail {

// Dynamics constants. States stay in [-kStateBound, kStateBound].
constexpr double kStateDecay = 0.9;
constexpr double kActionGain = 0.5;
constexpr double kDynamicsNoise = 0.1;
constexpr double kStateBound = 8.0;

inline double synth_mean(MeanFn fn, const VectorD& s, std::int64_t k) {
    const auto ds = s.size();
    switch (fn) {
        case MeanFn::zero: return 0.0;
        case MeanFn::linear: return 0.5 * s[k % ds];
        case MeanFn::sinusoidal: return std::sin(s[k % ds]);
    }
    throw Error("synth_mean: unknown mean function");
}

}  // namespace detail

inline void validate_synth_config(const SynthConfig& c) {
    if (c.state_dim < 1 || c.action_dim < 1 || c.n_trajectories < 1 || c.trajectory_length < 1) {
        throw Error("SynthConfig: all counts must be >= 1");
    }
    if (!(c.sigma_true > 0.0)) throw Error("SynthConfig: sigma_true must be > 0");
    // Keep the true scale inside the estimator's log-std clamp range, else
    // the EAS oracle comparison is meaningless.
    const double lo = std::exp(-5.0), hi = std::exp(2.0);
    if (c.sigma_true < lo || c.sigma_true > hi) {
        throw Error("SynthConfig: sigma_true outside representable range [e^-5, e^2]");
    }
    if (c.sigma_true_2) {
        if (!(*c.sigma_true_2 > 0.0) || *c.sigma_true_2 < lo || *c.sigma_true_2 > hi) {
            throw Error("SynthConfig: sigma_true_2 outside representable range");
        }
        if (c.mixture_fraction < 0.0 || c.mixture_fraction > 1.0) {
            throw Error("SynthConfig: mixture_fraction must lie in [0, 1]");
        }
    }
}

inline std::pair<Dataset, SynthGroundTruth> generate_synth(const SynthConfig& config) {
    validate_synth_config(config);
    const std::int64_t T = config.trajectory_length;
    const std::int64_t n = config.n_trajectories * T;
    const std::int64_t ds = config.state_dim;
    const std::int64_t da = config.action_dim;

    Dataset d;
    d.name = config.name;
    d.states.resize(n, ds);
    d.actions.resize(n, da);
    d.rewards.resize(n);
    d.next_states.resize(n, ds);
    d.episode_starts.reserve(static_cast<std::size_t>(config.n_trajectories));

    Rng rng(config.seed);
    VectorD s(ds), s_next(ds), u(da), mu(da);

    double dev_sq_sum = 0.0;     // sum of (u - mu)^2 over all samples and dims
    double return_sum = 0.0;     // undiscounted per-trajectory returns
    std::int64_t row = 0;
    for (std::int64_t traj = 0; traj < config.n_trajectories; ++traj) {
        d.episode_starts.push_back(row);
        for (std::int64_t k = 0; k < ds; ++k) s[k] = rng.uniform(-1.0, 1.0);
        double sigma = config.sigma_true;
        if (config.sigma_true_2 && rng.uniform() < config.mixture_fraction) {
            sigma = *config.sigma_true_2;
        }
        double traj_return = 0.0;
        for (std::int64_t t = 0; t < T; ++t, ++row) {
            for (std::int64_t k = 0; k < da; ++k) {
                mu[k] = detail::synth_mean(config.mean_fn, s, k);
                const double dev = sigma * rng.normal();
                u[k] = mu[k] + dev;
                dev_sq_sum += dev * dev;
            }
            double reward;
            if (config.reward_fn == RewardFn::action_quadratic) {
                reward = -u.squaredNorm() / static_cast<double>(da);
            } else {
                reward = s.mean();
            }
            const double a_mean = u.array().tanh().mean();
            for (std::int64_t k = 0; k < ds; ++k) {
                const double next = detail::kStateDecay * s[k] + detail::kActionGain * a_mean +
                                    detail::kDynamicsNoise * rng.normal();
                s_next[k] = std::clamp(next, -detail::kStateBound, detail::kStateBound);
            }
            d.states.row(row) = s.cast<float>().transpose();
            d.actions.row(row) = u.array().tanh().cast<float>().transpose().matrix();
            d.rewards[row] = static_cast<float>(reward);
            d.next_states.row(row) = s_next.cast<float>().transpose();
            traj_return += reward;
            s = s_next;
        }
        return_sum += traj_return;
    }

    d.meta.state_min = std::vector<double>(static_cast<std::size_t>(ds), -detail::kStateBound);
    d.meta.state_max = std::vector<double>(static_cast<std::size_t>(ds), detail::kStateBound);
    d.meta.action_min = std::vector<double>(static_cast<std::size_t>(da), -1.0);
    d.meta.action_max = std::vector<double>(static_cast<std::size_t>(da), 1.0);
    d.meta.discount = 1.0;
    // Floor strictly below every observed return keeps normalized returns
    // positive, which ERI requires.
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(config.n_trajectories));
    for (std::int64_t traj = 0; traj < config.n_trajectories; ++traj) {
        double g = 0.0;
        for (std::int64_t t = traj * T; t < (traj + 1) * T; ++t) g += d.rewards[t];
        returns.push_back(g);
    }
    d.meta.return_floor = *std::min_element(returns.begin(), returns.end()) - 1.0;

    validate_dataset(d);

    SynthGroundTruth truth;
    truth.sigma_true = config.sigma_true;
    truth.sigma_true_2 = config.sigma_true_2;
    truth.mixture_fraction = config.sigma_true_2 ? config.mixture_fraction : 0.0;
    truth.empirical_pretanh_std = std::sqrt(dev_sq_sum / static_cast<double>(n * da));
    truth.empirical_mean_return = return_sum / static_cast<double>(config.n_trajectories);
    if (config.mean_fn == MeanFn::zero && config.reward_fn == RewardFn::action_quadratic &&
        !config.sigma_true_2) {
        truth.analytic_mean_return =
            -config.sigma_true * config.sigma_true * static_cast<double>(T);
    }
    return {std::move(d), truth};
}

inline MeanFn parse_mean_fn(const std::string& s) {
    if (s == "zero") return MeanFn::zero;
    if (s == "linear") return MeanFn::linear;
    if (s == "sinusoidal") return MeanFn::sinusoidal;
    throw Error("unknown mean function: " + s + " (expected zero|linear|sinusoidal)");
}

inline RewardFn parse_reward_fn(const std::string& s) {
    if (s == "action-quadratic") return RewardFn::action_quadratic;
    if (s == "state-linear") return RewardFn::state_linear;
    throw Error("unknown reward function: " + s + " (expected action-quadratic|state-linear)");
}

}  // namespace dqi
