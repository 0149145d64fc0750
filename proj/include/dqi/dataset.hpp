#pragma once

// Offline transition datasets: in-memory model, validation, and the two
// on-disk formats.
//
// Portable-binary: a JSON manifest {name, n_transitions, state_dim,
// action_dim, episode_starts, meta, data_file} next to one little-endian
// float32 blob laid out as [states][actions][rewards][next_states], each
// block row-major.
//
// CSV: header `s0..s{ds-1},a0..a{da-1},r,ns0..ns{ds-1},episode_start`
// with one transition per row and an optional `<stem>.meta.json` sidecar.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dqi/core.hpp"

namespace dqi {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;
using MatrixD = Eigen::MatrixXd;
using VectorD = Eigen::VectorXd;

enum class DatasetFormat { portable_binary, csv };

struct DatasetMeta {
    std::optional<std::vector<double>> state_min, state_max;
    std::optional<std::vector<double>> action_min, action_max;
    std::optional<double> return_floor;
    double deploy_cost = 0.0;
    double fixed_cost = 0.0;
    double discount = 1.0;

    bool has_state_ranges() const { return state_min && state_max; }
    bool has_action_ranges() const { return action_min && action_max; }
};

struct Dataset {
    std::string name;
    MatrixF states;       // n x state_dim
    MatrixF actions;      // n x action_dim
    VectorF rewards;      // n
    MatrixF next_states;  // n x state_dim
    std::vector<std::int64_t> episode_starts;
    DatasetMeta meta;

    std::int64_t n_transitions() const { return states.rows(); }
    std::int64_t state_dim() const { return states.cols(); }
    std::int64_t action_dim() const { return actions.cols(); }
    std::int64_t n_trajectories() const {
        return static_cast<std::int64_t>(episode_starts.size());
    }
};

/// Half-open [start, end) row range of one trajectory.
struct TrajectoryRange {
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::int64_t length() const { return end - start; }
};

namespace detail {

inline void check_finite_matrix(const MatrixF& m, const std::string& field,
                                const std::string& dataset) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (!std::isfinite(m(r, c))) {
                throw Error("dataset '" + dataset + "': non-finite value in " + field +
                            " at row " + std::to_string(r) + ", column " + std::to_string(c));
            }
        }
    }
}

inline void check_ranges(const std::optional<std::vector<double>>& lo,
                         const std::optional<std::vector<double>>& hi,
                         std::int64_t dim, const std::string& what,
                         const std::string& dataset) {
    if (!lo && !hi) return;
    if (!lo || !hi) {
        throw Error("dataset '" + dataset + "': " + what +
                    " range must declare both min and max");
    }
    if (static_cast<std::int64_t>(lo->size()) != dim ||
        static_cast<std::int64_t>(hi->size()) != dim) {
        throw Error("dataset '" + dataset + "': " + what + " range length " +
                    std::to_string(lo->size()) + " does not match dimension " +
                    std::to_string(dim));
    }
    for (std::int64_t i = 0; i < dim; ++i) {
        if (!std::isfinite((*lo)[i]) || !std::isfinite((*hi)[i])) {
            throw Error("dataset '" + dataset + "': non-finite value in " + what +
                        " range, dimension " + std::to_string(i));
        }
        if (!((*lo)[i] < (*hi)[i])) {
            throw Error("dataset '" + dataset + "': " + what + " range min >= max in dimension " +
                        std::to_string(i));
        }
    }
}

}  // namespace detail

/// Full invariant check; load paths call this before returning a Dataset.
inline void validate_dataset(const Dataset& d) {
    const std::int64_t n = d.states.rows();
    if (n < 1) throw Error("dataset '" + d.name + "': no transitions");
    if (d.states.cols() < 1) throw Error("dataset '" + d.name + "': state_dim < 1");
    if (d.actions.cols() < 1) throw Error("dataset '" + d.name + "': action_dim < 1");
    if (d.actions.rows() != n || d.rewards.size() != n || d.next_states.rows() != n) {
        throw Error("dataset '" + d.name + "': dimension mismatch, arrays disagree on row count (states " +
                    std::to_string(n) + ", actions " + std::to_string(d.actions.rows()) +
                    ", rewards " + std::to_string(d.rewards.size()) + ", next_states " +
                    std::to_string(d.next_states.rows()) + ")");
    }
    if (d.next_states.cols() != d.states.cols()) {
        throw Error("dataset '" + d.name + "': dimension mismatch, next_states has " +
                    std::to_string(d.next_states.cols()) + " columns, states has " +
                    std::to_string(d.states.cols()));
    }
    if (d.episode_starts.empty() || d.episode_starts.front() != 0) {
        throw Error("dataset '" + d.name + "': unsorted episode_starts, first entry must be 0");
    }
    for (std::size_t i = 1; i < d.episode_starts.size(); ++i) {
        if (d.episode_starts[i] <= d.episode_starts[i - 1]) {
            throw Error("dataset '" + d.name + "': unsorted episode_starts at index " +
                        std::to_string(i));
        }
    }
    if (d.episode_starts.back() >= n) {
        throw Error("dataset '" + d.name + "': episode_starts entry " +
                    std::to_string(d.episode_starts.back()) + " out of range (n = " +
                    std::to_string(n) + ")");
    }
    detail::check_finite_matrix(d.states, "states", d.name);
    detail::check_finite_matrix(d.actions, "actions", d.name);
    detail::check_finite_matrix(d.next_states, "next_states", d.name);
    for (Eigen::Index i = 0; i < d.rewards.size(); ++i) {
        if (!std::isfinite(d.rewards[i])) {
            throw Error("dataset '" + d.name + "': non-finite value in rewards at row " +
                        std::to_string(i));
        }
    }
    detail::check_ranges(d.meta.state_min, d.meta.state_max, d.states.cols(), "state", d.name);
    detail::check_ranges(d.meta.action_min, d.meta.action_max, d.actions.cols(), "action", d.name);
    if (d.meta.deploy_cost < 0 || d.meta.fixed_cost < 0) {
        throw Error("dataset '" + d.name + "': costs must be >= 0");
    }
    if (!(d.meta.discount > 0.0 && d.meta.discount <= 1.0)) {
        throw Error("dataset '" + d.name + "': discount must lie in (0, 1]");
    }
}

/// Partition 0..n into one half-open range per trajectory, in order.
inline std::vector<TrajectoryRange> segment_trajectories(const Dataset& d) {
    std::vector<TrajectoryRange> out;
    out.reserve(d.episode_starts.size());
    const std::int64_t n = d.n_transitions();
    for (std::size_t i = 0; i < d.episode_starts.size(); ++i) {
        const std::int64_t start = d.episode_starts[i];
        const std::int64_t end =
            (i + 1 < d.episode_starts.size()) ? d.episode_starts[i + 1] : n;
        out.push_back({start, end});
    }
    return out;
}

/// Actions mapped per dimension from [min, max] to (-1, 1).
struct NormalizedActions {
    MatrixD actions;  // action_dim x n, one column per transition
    std::vector<std::int64_t> degenerate_dims;  // min == max, mapped to 0
    bool used_observed_ranges = false;
};

/// Affine map of each action dimension onto [-1+eps, 1-eps]. Declared ranges
/// are used when present, otherwise the observed per-dimension extremes.
inline NormalizedActions normalize_actions(const Dataset& d) {
    constexpr double kEps = 1e-6;
    const std::int64_t n = d.n_transitions();
    const std::int64_t da = d.action_dim();

    NormalizedActions out;
    out.actions.resize(da, n);

    std::vector<double> lo(da), hi(da);
    if (d.meta.has_action_ranges()) {
        lo = *d.meta.action_min;
        hi = *d.meta.action_max;
    } else {
        out.used_observed_ranges = true;
        for (std::int64_t k = 0; k < da; ++k) {
            lo[k] = static_cast<double>(d.actions.col(k).minCoeff());
            hi[k] = static_cast<double>(d.actions.col(k).maxCoeff());
        }
    }

    for (std::int64_t k = 0; k < da; ++k) {
        if (!(lo[k] < hi[k])) {
            out.degenerate_dims.push_back(k);
            out.actions.row(k).setZero();
            continue;
        }
        const double scale = 2.0 / (hi[k] - lo[k]);
        for (std::int64_t i = 0; i < n; ++i) {
            double v = (static_cast<double>(d.actions(i, k)) - lo[k]) * scale - 1.0;
            out.actions(k, i) = std::clamp(v, -1.0 + kEps, 1.0 - kEps);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Portable-binary format
// ---------------------------------------------------------------------------

namespace detail {

inline void write_f32_block(std::ofstream& os, const float* data, std::size_t count) {
    static_assert(sizeof(float) == 4);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, &data[i], 4);
            char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>(bits >> 24)};
            os.write(b, 4);
        }
    }
}

inline void read_f32_block(std::ifstream& is, float* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 4));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            unsigned char b[4];
            is.read(reinterpret_cast<char*>(b), 4);
            std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                 (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
            std::memcpy(&data[i], &bits, 4);
        }
    }
}

inline nlohmann::json meta_to_json(const DatasetMeta& m) {
    nlohmann::json j;
    j["state_min"] = m.state_min ? nlohmann::json(*m.state_min) : nlohmann::json();
    j["state_max"] = m.state_max ? nlohmann::json(*m.state_max) : nlohmann::json();
    j["action_min"] = m.action_min ? nlohmann::json(*m.action_min) : nlohmann::json();
    j["action_max"] = m.action_max ? nlohmann::json(*m.action_max) : nlohmann::json();
    j["return_floor"] = m.return_floor ? nlohmann::json(*m.return_floor) : nlohmann::json();
    j["deploy_cost"] = m.deploy_cost;
    j["fixed_cost"] = m.fixed_cost;
    j["discount"] = m.discount;
    return j;
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
    DatasetMeta m;
    auto opt_vec = [&](const char* key) -> std::optional<std::vector<double>> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<std::vector<double>>();
    };
    m.state_min = opt_vec("state_min");
    m.state_max = opt_vec("state_max");
    m.action_min = opt_vec("action_min");
    m.action_max = opt_vec("action_max");
    if (j.contains("return_floor") && !j.at("return_floor").is_null()) {
        m.return_floor = j.at("return_floor").get<double>();
    }
    m.deploy_cost = j.value("deploy_cost", 0.0);
    m.fixed_cost = j.value("fixed_cost", 0.0);
    m.discount = j.value("discount", 1.0);
    return m;
}

}  // namespace detail

/// Writes `<path>` (JSON manifest) and the float32 blob it points at.
/// The blob path is `<path stem>.bin` next to the manifest.
inline void save_dataset(const Dataset& d, const std::filesystem::path& manifest_path) {
    validate_dataset(d);
    std::filesystem::path bin_path = manifest_path;
    bin_path.replace_extension(".bin");

    nlohmann::json manifest;
    manifest["name"] = d.name;
    manifest["n_transitions"] = d.n_transitions();
    manifest["state_dim"] = d.state_dim();
    manifest["action_dim"] = d.action_dim();
    manifest["episode_starts"] = d.episode_starts;
    manifest["meta"] = detail::meta_to_json(d.meta);
    manifest["data_file"] = bin_path.filename().string();

    std::ofstream mf(manifest_path);
    if (!mf) throw Error("cannot write manifest: " + manifest_path.string());
    mf << manifest.dump(2) << "\n";
    mf.close();

    std::ofstream bf(bin_path, std::ios::binary);
    if (!bf) throw Error("cannot write data file: " + bin_path.string());
    detail::write_f32_block(bf, d.states.data(), static_cast<std::size_t>(d.states.size()));
    detail::write_f32_block(bf, d.actions.data(), static_cast<std::size_t>(d.actions.size()));
    detail::write_f32_block(bf, d.rewards.data(), static_cast<std::size_t>(d.rewards.size()));
    detail::write_f32_block(bf, d.next_states.data(),
                            static_cast<std::size_t>(d.next_states.size()));
    if (!bf) throw Error("short write: " + bin_path.string());
}

namespace detail {

inline Dataset load_portable(const std::filesystem::path& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw Error("cannot open manifest: " + manifest_path.string());
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed header in " + manifest_path.string() + ": " + e.what());
    }

    Dataset d;
    try {
        d.name = manifest.at("name").get<std::string>();
        const auto n = manifest.at("n_transitions").get<std::int64_t>();
        const auto ds = manifest.at("state_dim").get<std::int64_t>();
        const auto da = manifest.at("action_dim").get<std::int64_t>();
        if (n < 1 || ds < 1 || da < 1) {
            throw Error("malformed header in " + manifest_path.string() +
                        ": dimensions must be >= 1");
        }
        d.states.resize(n, ds);
        d.actions.resize(n, da);
        d.rewards.resize(n);
        d.next_states.resize(n, ds);
        d.episode_starts = manifest.at("episode_starts").get<std::vector<std::int64_t>>();
        d.meta = meta_from_json(manifest.at("meta"));

        const auto data_file = manifest.at("data_file").get<std::string>();
        std::filesystem::path bin_path = manifest_path.parent_path() / data_file;
        const auto expected_floats = static_cast<std::uintmax_t>(n) * (2 * ds + da + 1);
        std::error_code ec;
        const auto actual_bytes = std::filesystem::file_size(bin_path, ec);
        if (ec) throw Error("cannot open data file: " + bin_path.string());
        if (actual_bytes != expected_floats * 4) {
            throw Error("dimension mismatch in " + bin_path.string() + ": manifest implies " +
                        std::to_string(expected_floats * 4) + " bytes, file has " +
                        std::to_string(actual_bytes));
        }
        std::ifstream bf(bin_path, std::ios::binary);
        if (!bf) throw Error("cannot open data file: " + bin_path.string());
        read_f32_block(bf, d.states.data(), static_cast<std::size_t>(d.states.size()));
        read_f32_block(bf, d.actions.data(), static_cast<std::size_t>(d.actions.size()));
        read_f32_block(bf, d.rewards.data(), static_cast<std::size_t>(d.rewards.size()));
        read_f32_block(bf, d.next_states.data(), static_cast<std::size_t>(d.next_states.size()));
        if (!bf) throw Error("short read: " + bin_path.string());
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed header in " + manifest_path.string() + ": " + e.what());
    }
    validate_dataset(d);
    return d;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw Error("malformed value '" + cell + "' at row " + std::to_string(row) +
                    ", column " + std::to_string(col));
    }
    return v;
}

inline Dataset load_csv(const std::filesystem::path& csv_path) {
    std::ifstream f(csv_path);
    if (!f) throw Error("cannot open file: " + csv_path.string());

    std::string header;
    if (!std::getline(f, header)) throw Error("malformed header: empty file " + csv_path.string());
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const auto cols = split_csv_line(header);

    std::int64_t ds = 0, da = 0;
    std::size_t i = 0;
    while (i < cols.size() && cols[i] == "s" + std::to_string(ds)) { ++ds; ++i; }
    while (i < cols.size() && cols[i] == "a" + std::to_string(da)) { ++da; ++i; }
    if (ds < 1 || da < 1 || i >= cols.size() || cols[i] != "r") {
        throw Error("malformed header in " + csv_path.string() +
                    ": expected s0..,a0..,r,ns0..,episode_start");
    }
    ++i;
    for (std::int64_t k = 0; k < ds; ++k, ++i) {
        if (i >= cols.size() || cols[i] != "ns" + std::to_string(k)) {
            throw Error("malformed header in " + csv_path.string() + ": missing ns" +
                        std::to_string(k));
        }
    }
    if (i + 1 != cols.size() || cols[i] != "episode_start") {
        throw Error("malformed header in " + csv_path.string() + ": missing episode_start");
    }
    const std::size_t n_cols = cols.size();

    std::vector<float> states, actions, rewards, next_states;
    std::vector<std::int64_t> episode_starts;
    std::string line;
    std::size_t row = 0;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != n_cols) {
            throw Error("dimension mismatch in " + csv_path.string() + ": row " +
                        std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(n_cols));
        }
        std::size_t c = 0;
        for (std::int64_t k = 0; k < ds; ++k, ++c)
            states.push_back(static_cast<float>(parse_cell(cells[c], row, c)));
        for (std::int64_t k = 0; k < da; ++k, ++c)
            actions.push_back(static_cast<float>(parse_cell(cells[c], row, c)));
        rewards.push_back(static_cast<float>(parse_cell(cells[c], row, c)));
        ++c;
        for (std::int64_t k = 0; k < ds; ++k, ++c)
            next_states.push_back(static_cast<float>(parse_cell(cells[c], row, c)));
        const double flag = parse_cell(cells[c], row, c);
        if (flag != 0.0 && flag != 1.0) {
            throw Error("malformed value in " + csv_path.string() + ": episode_start at row " +
                        std::to_string(row) + " must be 0 or 1");
        }
        if (flag == 1.0) episode_starts.push_back(static_cast<std::int64_t>(row));
        ++row;
    }
    if (row == 0) throw Error("dataset '" + csv_path.string() + "': no transitions");

    Dataset d;
    d.name = csv_path.stem().string();
    const auto n = static_cast<std::int64_t>(row);
    d.states = Eigen::Map<MatrixF>(states.data(), n, ds);
    d.actions = Eigen::Map<MatrixF>(actions.data(), n, da);
    d.rewards = Eigen::Map<VectorF>(rewards.data(), n);
    d.next_states = Eigen::Map<MatrixF>(next_states.data(), n, ds);
    d.episode_starts = std::move(episode_starts);

    std::filesystem::path sidecar = csv_path;
    sidecar.replace_extension(".meta.json");
    if (std::filesystem::exists(sidecar)) {
        std::ifstream sf(sidecar);
        nlohmann::json j;
        try {
            sf >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed sidecar " + sidecar.string() + ": " + e.what());
        }
        d.meta = meta_from_json(j);
        if (j.contains("name")) d.name = j.at("name").get<std::string>();
    }
    validate_dataset(d);
    return d;
}

}  // namespace detail

inline Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    if (!std::filesystem::exists(path)) throw Error("no such file: " + path.string());
    switch (format) {
        case DatasetFormat::portable_binary: return detail::load_portable(path);
        case DatasetFormat::csv: return detail::load_csv(path);
    }
    throw Error("unknown dataset format");
}

/// Format by extension: .csv loads as CSV, anything else as portable-binary.
inline Dataset load_dataset(const std::filesystem::path& path) {
    return load_dataset(path, path.extension() == ".csv" ? DatasetFormat::csv
                                                         : DatasetFormat::portable_binary);
}

}  // namespace dqi
