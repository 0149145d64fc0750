#pragma once

// Behavior-policy fit: a tanh-transformed Gaussian policy whose mean and
// log-std heads share a ReLU MLP feature map, trained by minimizing the
// negative log likelihood of the dataset's (state, action) pairs. The mean
// predicted pre-tanh standard deviation over all dataset states is the
// estimated action stochasticity (EAS).
//
// All training math runs in double; gradients are exact analytic
// backpropagation and can be audited against central finite differences
// (see check_gradients below and the `check-gradients` CLI command).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dqi/core.hpp"
#include "dqi/dataset.hpp"

namespace dqi {

enum class SigmaReduction { mean, max };

struct BehaviorConfig {
    std::vector<int> hidden_widths = {100, 100};
    int epochs = 50;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double log_std_min = -5.0;
    double log_std_max = 2.0;
    SigmaReduction sigma_reduction = SigmaReduction::mean;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> epoch_nll;  // mean NLL per epoch, in pass order
    double final_nll = 0.0;
    int epochs_run = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Smooth saturating clamp onto (lo, hi): y = m + s*tanh((x-m)/s) with m the
// midpoint and s the half-width. Near-identity in the interior, gradient
// sech^2 never reaches zero.
inline double soft_clamp(double x, double lo, double hi) {
    const double m = 0.5 * (lo + hi);
    const double s = 0.5 * (hi - lo);
    return m + s * std::tanh((x - m) / s);
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)

}  // namespace detail

/// Per-dimension log density of tanh(N(mu, sigma^2)) at a in (-1, 1):
/// Gaussian log density at atanh(a) minus the tanh Jacobian log(1 - a^2).
inline double tanh_gaussian_log_density(double mu, double sigma, double a) {
    if (!(std::abs(a) < 1.0)) {
        throw Error("tanh_gaussian_log_density: |action| >= 1, actions must be pre-clipped");
    }
    const double u = std::atanh(a);
    const double z = (u - mu) / sigma;
    return -detail::kHalfLog2Pi - std::log(sigma) - 0.5 * z * z - std::log1p(-a * a);
}

class BehaviorPolicy {
public:
    BehaviorPolicy() = default;

    /// Freshly initialized policy: uniform fan-in weights, zero biases,
    /// log-std head bias at -1.
    BehaviorPolicy(std::int64_t state_dim, std::int64_t action_dim, const BehaviorConfig& config)
        : config_(config), state_dim_(state_dim), action_dim_(action_dim) {
        if (state_dim < 1 || action_dim < 1) {
            throw Error("BehaviorPolicy: dimensions must be >= 1");
        }
        if (config.hidden_widths.empty()) {
            throw Error("BehaviorPolicy: need at least one hidden layer");
        }
        state_mean_ = VectorD::Zero(state_dim);
        state_std_ = VectorD::Ones(state_dim);

        Rng rng(config.seed);
        std::int64_t in = state_dim;
        for (int width : config.hidden_widths) {
            tensors_.push_back(init_weight(width, in, rng));
            tensors_.push_back(MatrixD::Zero(width, 1));
            in = width;
        }
        tensors_.push_back(init_weight(action_dim, in, rng));   // mean head
        tensors_.push_back(MatrixD::Zero(action_dim, 1));
        tensors_.push_back(init_weight(action_dim, in, rng));   // log-std head
        tensors_.push_back(MatrixD::Constant(action_dim, 1, -1.0));
    }

    const BehaviorConfig& config() const { return config_; }
    std::int64_t state_dim() const { return state_dim_; }
    std::int64_t action_dim() const { return action_dim_; }
    std::size_t n_layers() const { return config_.hidden_widths.size(); }

    std::vector<MatrixD>& tensors() { return tensors_; }
    const std::vector<MatrixD>& tensors() const { return tensors_; }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& t : tensors_) n += t.size();
        return n;
    }

    void set_standardizer(const VectorD& mean, const VectorD& std) {
        if (mean.size() != state_dim_ || std.size() != state_dim_) {
            throw Error("set_standardizer: dimension mismatch");
        }
        state_mean_ = mean;
        state_std_ = std;
    }
    const VectorD& state_mean() const { return state_mean_; }
    const VectorD& state_std() const { return state_std_; }

    /// (mu, sigma) heads for a batch of raw states given as columns.
    void heads(const MatrixD& raw_states, MatrixD& mu, MatrixD& sigma) const {
        MatrixD x = standardize(raw_states);
        Forward f;
        forward(x, f);
        mu = std::move(f.mu);
        sigma = std::move(f.sigma);
    }

    /// Log density of the tanh-Gaussian at one (state, normalized action).
    double log_prob(const VectorD& state, const VectorD& action_norm) const {
        if (state.size() != state_dim_ || action_norm.size() != action_dim_) {
            throw Error("log_prob: dimension mismatch");
        }
        MatrixD mu, sigma;
        heads(state, mu, sigma);
        double lp = 0.0;
        for (std::int64_t k = 0; k < action_dim_; ++k) {
            lp += tanh_gaussian_log_density(mu(k, 0), sigma(k, 0), action_norm[k]);
        }
        return lp;
    }

    /// Mean NLL of a batch. X holds raw states as columns, U the pre-tanh
    /// actions atanh(a), const_terms the per-sample tanh Jacobian sums
    /// sum_k log(1 - a_k^2) (independent of the parameters).
    double batch_nll(const MatrixD& X_raw, const MatrixD& U, const VectorD& const_terms) const {
        MatrixD x = standardize(X_raw);
        Forward f;
        forward(x, f);
        return nll_from_forward(f, U, const_terms);
    }

    /// Analytic gradient of the mean batch NLL with respect to every
    /// parameter tensor, in tensor order. Optionally reports the NLL value.
    std::vector<MatrixD> nll_gradient(const MatrixD& X_raw, const MatrixD& U,
                                      const VectorD& const_terms,
                                      double* nll_out = nullptr) const {
        MatrixD x = standardize(X_raw);
        Forward f;
        forward(x, f);
        if (nll_out) *nll_out = nll_from_forward(f, U, const_terms);
        return backward(x, f, U);
    }

    /// Predicted pre-tanh sigma for every dataset state, reduced over action
    /// dimensions (mean by default). Output length = n_transitions.
    std::vector<double> stochasticity_profile(const Dataset& d) const {
        if (d.state_dim() != state_dim_) throw Error("stochasticity_profile: state_dim mismatch");
        const std::int64_t n = d.n_transitions();
        std::vector<double> profile(static_cast<std::size_t>(n));
        constexpr std::int64_t kChunk = 8192;
        MatrixD x_chunk;
        for (std::int64_t begin = 0; begin < n; begin += kChunk) {
            const std::int64_t len = std::min(kChunk, n - begin);
            x_chunk.resize(state_dim_, len);
            for (std::int64_t i = 0; i < len; ++i) {
                x_chunk.col(i) = d.states.row(begin + i).transpose().cast<double>();
            }
            MatrixD mu, sigma;
            heads(x_chunk, mu, sigma);
            for (std::int64_t i = 0; i < len; ++i) {
                double v;
                if (config_.sigma_reduction == SigmaReduction::max) {
                    v = sigma.col(i).maxCoeff();
                } else {
                    v = sigma.col(i).mean();
                }
                profile[static_cast<std::size_t>(begin + i)] = v;
            }
        }
        return profile;
    }

    MatrixD standardize(const MatrixD& raw_states) const {
        MatrixD x = raw_states;
        x.colwise() -= state_mean_;
        x.array().colwise() /= state_std_.array();
        return x;
    }

    // Tensor accessors; layout is [W0, b0, W1, b1, ..., Wmean, bmean, Wsig, bsig].
    MatrixD& layer_w(std::size_t i) { return tensors_[2 * i]; }
    MatrixD& layer_b(std::size_t i) { return tensors_[2 * i + 1]; }
    MatrixD& mean_w() { return tensors_[2 * n_layers()]; }
    MatrixD& mean_b() { return tensors_[2 * n_layers() + 1]; }
    MatrixD& logstd_w() { return tensors_[2 * n_layers() + 2]; }
    MatrixD& logstd_b() { return tensors_[2 * n_layers() + 3]; }
    const MatrixD& layer_w(std::size_t i) const { return tensors_[2 * i]; }
    const MatrixD& layer_b(std::size_t i) const { return tensors_[2 * i + 1]; }
    const MatrixD& mean_w() const { return tensors_[2 * n_layers()]; }
    const MatrixD& mean_b() const { return tensors_[2 * n_layers() + 1]; }
    const MatrixD& logstd_w() const { return tensors_[2 * n_layers() + 2]; }
    const MatrixD& logstd_b() const { return tensors_[2 * n_layers() + 3]; }

private:
    struct Forward {
        std::vector<MatrixD> z;  // pre-activations per hidden layer
        std::vector<MatrixD> h;  // post-activations per hidden layer
        MatrixD mu, raw, t, logstd, sigma;
    };

    static MatrixD init_weight(std::int64_t rows, std::int64_t cols, Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        MatrixD w(rows, cols);
        for (std::int64_t r = 0; r < rows; ++r) {
            for (std::int64_t c = 0; c < cols; ++c) {
                w(r, c) = rng.uniform(-bound, bound);
            }
        }
        return w;
    }

    void forward(const MatrixD& x, Forward& f) const {
        const std::size_t L = n_layers();
        f.z.resize(L);
        f.h.resize(L);
        const MatrixD* in = &x;
        for (std::size_t i = 0; i < L; ++i) {
            f.z[i].noalias() = layer_w(i) * (*in);
            f.z[i].colwise() += layer_b(i).col(0);
            f.h[i] = f.z[i].cwiseMax(0.0);
            in = &f.h[i];
        }
        f.mu.noalias() = mean_w() * (*in);
        f.mu.colwise() += mean_b().col(0);
        f.raw.noalias() = logstd_w() * (*in);
        f.raw.colwise() += logstd_b().col(0);

        const double m = 0.5 * (config_.log_std_min + config_.log_std_max);
        const double s = 0.5 * (config_.log_std_max - config_.log_std_min);
        f.t = ((f.raw.array() - m) / s).tanh();
        f.logstd = (m + s * f.t.array()).matrix();
        f.sigma = f.logstd.array().exp().matrix();
    }

    double nll_from_forward(const Forward& f, const MatrixD& U, const VectorD& const_terms) const {
        const auto B = static_cast<double>(U.cols());
        Eigen::ArrayXXd z = (U - f.mu).array() / f.sigma.array();
        const double gauss =
            (f.logstd.array() + 0.5 * z.square() + detail::kHalfLog2Pi).sum() / B;
        return gauss + const_terms.sum() / B;
    }

    std::vector<MatrixD> backward(const MatrixD& x, const Forward& f, const MatrixD& U) const {
        const std::size_t L = n_layers();
        const double inv_b = 1.0 / static_cast<double>(U.cols());

        Eigen::ArrayXXd inv_sigma = f.sigma.array().inverse();
        Eigen::ArrayXXd r = (U - f.mu).array() * inv_sigma;  // standardized residual
        MatrixD d_mu = (-r * inv_sigma * inv_b).matrix();
        MatrixD d_logstd = ((1.0 - r.square()) * inv_b).matrix();
        // d logstd / d raw = sech^2((raw - m)/s) = 1 - t^2; the s factors of
        // the clamp cancel.
        MatrixD d_raw = (d_logstd.array() * (1.0 - f.t.array().square())).matrix();

        std::vector<MatrixD> grads(tensors_.size());
        const MatrixD& top = L > 0 ? f.h[L - 1] : x;
        grads[2 * L].noalias() = d_mu * top.transpose();
        grads[2 * L + 1] = d_mu.rowwise().sum();
        grads[2 * L + 2].noalias() = d_raw * top.transpose();
        grads[2 * L + 3] = d_raw.rowwise().sum();

        MatrixD d_h;
        d_h.noalias() = mean_w().transpose() * d_mu;
        d_h.noalias() += logstd_w().transpose() * d_raw;
        for (std::size_t i = L; i-- > 0;) {
            MatrixD d_z = (d_h.array() * (f.z[i].array() > 0.0).cast<double>()).matrix();
            const MatrixD& below = (i == 0) ? x : f.h[i - 1];
            grads[2 * i].noalias() = d_z * below.transpose();
            grads[2 * i + 1] = d_z.rowwise().sum();
            if (i > 0) d_h.noalias() = layer_w(i).transpose() * d_z;
        }
        return grads;
    }

    BehaviorConfig config_;
    std::int64_t state_dim_ = 0;
    std::int64_t action_dim_ = 0;
    VectorD state_mean_, state_std_;
    std::vector<MatrixD> tensors_;
};

/// Training inputs derived from a dataset: standardized-state source matrix,
/// pre-tanh actions, and the per-sample tanh Jacobian constants.
struct TrainingArrays {
    MatrixD states;       // state_dim x n, raw (policy standardizes)
    MatrixD pretanh;      // action_dim x n, atanh of normalized actions
    VectorD const_terms;  // n, sum_k log(1 - a_k^2)
    VectorD state_mean, state_std;
    NormalizedActions normalization;
};

inline TrainingArrays prepare_training_arrays(const Dataset& d) {
    const std::int64_t n = d.n_transitions();
    const std::int64_t ds = d.state_dim();
    const std::int64_t da = d.action_dim();

    TrainingArrays out;
    out.normalization = normalize_actions(d);
    out.states.resize(ds, n);
    for (std::int64_t i = 0; i < n; ++i) {
        out.states.col(i) = d.states.row(i).transpose().cast<double>();
    }
    out.pretanh.resize(da, n);
    out.const_terms.resize(n);
    for (std::int64_t i = 0; i < n; ++i) {
        double c = 0.0;
        for (std::int64_t k = 0; k < da; ++k) {
            const double a = out.normalization.actions(k, i);
            out.pretanh(k, i) = std::atanh(a);
            c += std::log1p(-a * a);
        }
        out.const_terms[i] = c;
    }
    out.state_mean = out.states.rowwise().mean();
    VectorD var = (out.states.colwise() - out.state_mean).array().square().matrix().rowwise().mean();
    out.state_std = var.array().sqrt().matrix();
    for (std::int64_t k = 0; k < ds; ++k) {
        if (out.state_std[k] < 1e-12) out.state_std[k] = 1.0;  // constant feature
    }
    return out;
}

/// Minimizes mean NLL with mini-batch Adam. Deterministic for a fixed seed:
/// initialization, shuffling, and accumulation order are all pinned.
inline std::pair<BehaviorPolicy, TrainReport> train_behavior_policy(const Dataset& d,
                                                                    const BehaviorConfig& config) {
    if (d.n_transitions() < 1) throw Error("train_behavior_policy: empty dataset");
    if (config.epochs < 1) throw Error("train_behavior_policy: epochs must be >= 1");
    if (config.batch_size < 1) throw Error("train_behavior_policy: batch_size must be >= 1");

    TrainingArrays arrays = prepare_training_arrays(d);
    const std::int64_t n = d.n_transitions();

    BehaviorPolicy policy(d.state_dim(), d.action_dim(), config);
    policy.set_standardizer(arrays.state_mean, arrays.state_std);

    // Adam state, one moment pair per tensor.
    std::vector<MatrixD> m, v;
    for (const auto& t : policy.tensors()) {
        m.push_back(MatrixD::Zero(t.rows(), t.cols()));
        v.push_back(MatrixD::Zero(t.rows(), t.cols()));
    }

    Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);

    TrainReport report;
    report.seed = config.seed;

    const std::int64_t bs = config.batch_size;
    MatrixD xb, ub;
    VectorD cb;
    std::int64_t step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(perm);
        double epoch_nll_sum = 0.0;
        for (std::int64_t begin = 0; begin < n; begin += bs) {
            const std::int64_t len = std::min(bs, n - begin);
            xb.resize(d.state_dim(), len);
            ub.resize(d.action_dim(), len);
            cb.resize(len);
            for (std::int64_t i = 0; i < len; ++i) {
                const std::int64_t src = perm[static_cast<std::size_t>(begin + i)];
                xb.col(i) = arrays.states.col(src);
                ub.col(i) = arrays.pretanh.col(src);
                cb[i] = arrays.const_terms[src];
            }
            double nll = 0.0;
            auto grads = policy.nll_gradient(xb, ub, cb, &nll);
            if (!std::isfinite(nll)) {
                throw Error("train_behavior_policy: non-finite loss at epoch " +
                            std::to_string(epoch) + ", step " + std::to_string(step) +
                            "; try a smaller learning rate (current " +
                            std::to_string(config.learning_rate) + ")");
            }
            epoch_nll_sum += nll * static_cast<double>(len);

            ++step;
            const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t t = 0; t < grads.size(); ++t) {
                m[t] = config.beta1 * m[t] + (1.0 - config.beta1) * grads[t];
                v[t] = (config.beta2 * v[t].array() +
                        (1.0 - config.beta2) * grads[t].array().square()).matrix();
                policy.tensors()[t].array() -=
                    config.learning_rate * (m[t].array() / bc1) /
                    ((v[t].array() / bc2).sqrt() + config.adam_eps);
            }
        }
        report.epoch_nll.push_back(epoch_nll_sum / static_cast<double>(n));
        ++report.epochs_run;
    }
    report.final_nll = report.epoch_nll.back();
    return {std::move(policy), std::move(report)};
}

/// Arithmetic mean of a stochasticity profile: the EAS indicator.
inline double eas(const std::vector<double>& profile) {
    if (profile.empty()) throw Error("eas: empty profile");
    return mean_of(profile);
}

// ---------------------------------------------------------------------------
// Finite-difference audit
// ---------------------------------------------------------------------------

struct GradientCheckResult {
    double max_rel_error = 0.0;
    std::vector<double> per_tensor_max;  // one entry per parameter tensor
};

/// Central-difference gradient of the mean batch NLL, evaluated through the
/// forward pass only. Used to audit the analytic backward pass.
inline std::vector<MatrixD> finite_difference_nll_gradient(BehaviorPolicy& policy,
                                                           const MatrixD& X, const MatrixD& U,
                                                           const VectorD& const_terms,
                                                           double h = 1e-4) {
    std::vector<MatrixD> grads;
    for (auto& tensor : policy.tensors()) {
        MatrixD g(tensor.rows(), tensor.cols());
        for (std::int64_t r = 0; r < tensor.rows(); ++r) {
            for (std::int64_t c = 0; c < tensor.cols(); ++c) {
                const double saved = tensor(r, c);
                tensor(r, c) = saved + h;
                const double up = policy.batch_nll(X, U, const_terms);
                tensor(r, c) = saved - h;
                const double down = policy.batch_nll(X, U, const_terms);
                tensor(r, c) = saved;
                g(r, c) = (up - down) / (2.0 * h);
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

/// Compares analytic and finite-difference gradients coordinate-wise.
/// Relative error uses max(|a|, |b|, 0.01) in the denominator so that
/// near-zero coordinates are held to a small absolute tolerance.
inline GradientCheckResult check_gradients(BehaviorPolicy& policy, const MatrixD& X,
                                           const MatrixD& U, const VectorD& const_terms,
                                           double h = 1e-4) {
    const auto analytic = policy.nll_gradient(X, U, const_terms);
    const auto fd = finite_difference_nll_gradient(policy, X, U, const_terms, h);
    GradientCheckResult res;
    for (std::size_t t = 0; t < analytic.size(); ++t) {
        double tensor_max = 0.0;
        for (std::int64_t r = 0; r < analytic[t].rows(); ++r) {
            for (std::int64_t c = 0; c < analytic[t].cols(); ++c) {
                const double a = analytic[t](r, c);
                const double b = fd[t](r, c);
                const double denom = std::max({std::abs(a), std::abs(b), 0.01});
                tensor_max = std::max(tensor_max, std::abs(a - b) / denom);
            }
        }
        res.per_tensor_max.push_back(tensor_max);
        res.max_rel_error = std::max(res.max_rel_error, tensor_max);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Serialization: JSON manifest + little-endian float64 parameter blob.
// ---------------------------------------------------------------------------

inline void save_policy(const BehaviorPolicy& policy, const std::filesystem::path& manifest_path) {
    std::filesystem::path bin_path = manifest_path;
    bin_path.replace_extension(".bin");

    nlohmann::json j;
    j["state_dim"] = policy.state_dim();
    j["action_dim"] = policy.action_dim();
    j["hidden_widths"] = policy.config().hidden_widths;
    j["log_std_min"] = policy.config().log_std_min;
    j["log_std_max"] = policy.config().log_std_max;
    j["sigma_reduction"] =
        policy.config().sigma_reduction == SigmaReduction::max ? "max" : "mean";
    j["seed"] = policy.config().seed;
    j["state_mean"] = std::vector<double>(policy.state_mean().data(),
                                          policy.state_mean().data() + policy.state_mean().size());
    j["state_std"] = std::vector<double>(policy.state_std().data(),
                                         policy.state_std().data() + policy.state_std().size());
    j["data_file"] = bin_path.filename().string();

    std::ofstream mf(manifest_path);
    if (!mf) throw Error("cannot write policy manifest: " + manifest_path.string());
    mf << j.dump(2) << "\n";

    std::ofstream bf(bin_path, std::ios::binary);
    if (!bf) throw Error("cannot write policy data: " + bin_path.string());
    for (const auto& t : policy.tensors()) {
        static_assert(sizeof(double) == 8);
        bf.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * 8));
    }
    if (!bf) throw Error("short write: " + bin_path.string());
}

inline BehaviorPolicy load_policy(const std::filesystem::path& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw Error("cannot open policy manifest: " + manifest_path.string());
    nlohmann::json j;
    try {
        mf >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed policy manifest " + manifest_path.string() + ": " + e.what());
    }
    BehaviorConfig config;
    config.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
    config.log_std_min = j.at("log_std_min").get<double>();
    config.log_std_max = j.at("log_std_max").get<double>();
    config.sigma_reduction = j.at("sigma_reduction").get<std::string>() == "max"
                                 ? SigmaReduction::max
                                 : SigmaReduction::mean;
    config.seed = j.at("seed").get<std::uint64_t>();

    BehaviorPolicy policy(j.at("state_dim").get<std::int64_t>(),
                          j.at("action_dim").get<std::int64_t>(), config);
    const auto mean = j.at("state_mean").get<std::vector<double>>();
    const auto std_ = j.at("state_std").get<std::vector<double>>();
    policy.set_standardizer(Eigen::Map<const VectorD>(mean.data(), mean.size()),
                            Eigen::Map<const VectorD>(std_.data(), std_.size()));

    std::filesystem::path bin_path = manifest_path.parent_path() /
                                     j.at("data_file").get<std::string>();
    std::ifstream bf(bin_path, std::ios::binary);
    if (!bf) throw Error("cannot open policy data: " + bin_path.string());
    for (auto& t : policy.tensors()) {
        bf.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
    }
    if (!bf) throw Error("short read: " + bin_path.string());
    return policy;
}

}  // namespace dqi
