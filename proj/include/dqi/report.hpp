#pragma once

// Analysis pipeline and report emission. cmd-level logic lives here rather
// than in the CLI translation unit so tests can drive it directly.
//
// Reproducibility contract: for fixed inputs, seeds, and config, the JSON
// report is byte-identical across runs except for the timestamp, which can
// be pinned. Numbers in the CSV rendering are printed through the same
// serializer as the JSON rendering, so the two carry identical values.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dqi/behavior.hpp"
#include "dqi/coverage.hpp"
#include "dqi/dataset.hpp"
#include "dqi/ranking.hpp"
#include "dqi/returns.hpp"

namespace dqi {

struct AnalysisOptions {
    BehaviorConfig behavior;
    std::optional<double> discount_override;
    std::optional<double> floor_override;
    int jobs = 1;
    std::string pinned_timestamp;  // empty = wall clock
};

struct DatasetAnalysis {
    std::string path;
    std::string name;
    bool ok = false;
    std::string error;  // set when !ok

    IndicatorRecord record;
    double floor = 0.0;
    bool floor_from_data = false;
    double mean_norm = 0.0;
    double max_norm = 0.0;
    std::int64_t n_transitions = 0;
    std::int64_t n_trajectories = 0;
    std::optional<CoverageResult> coverage;
    double final_nll = 0.0;
    int epochs_run = 0;
    std::uint64_t seed = 0;
    double deploy_cost = 0.0;
    double fixed_cost = 0.0;
    std::vector<std::string> warnings;
};

struct AnalysisReport {
    std::vector<DatasetAnalysis> datasets;
    AnalysisOptions options;
    std::string timestamp;
    int n_ok = 0;
    int n_failed = 0;
};

namespace detail {

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

inline DatasetAnalysis analyze_one(const std::filesystem::path& path,
                                   const AnalysisOptions& options, std::uint64_t seed) {
    DatasetAnalysis out;
    out.path = path.string();
    out.seed = seed;
    try {
        Dataset d = load_dataset(path);
        if (options.discount_override) d.meta.discount = *options.discount_override;
        out.name = d.name;
        out.record.name = d.name;
        out.n_transitions = d.n_transitions();
        out.n_trajectories = static_cast<std::int64_t>(d.episode_starts.size());
        out.deploy_cost = d.meta.deploy_cost;
        out.fixed_cost = d.meta.fixed_cost;

        const ReturnStats stats = compute_return_stats(d, options.floor_override);
        out.record.eri = stats.eri;
        out.floor = stats.floor;
        out.floor_from_data = stats.floor_from_data;
        out.mean_norm = stats.mean_norm;
        out.max_norm = stats.max_norm;
        if (stats.floor_from_data) {
            out.warnings.push_back(
                "no return floor declared or supplied; falling back to the observed "
                "minimum return, which clamps the weakest trajectory to zero");
        }

        out.coverage = coverage_ratio(d);
        if (out.coverage) {
            out.record.coverage = out.coverage->ratio;
            for (std::int64_t k : out.coverage->degenerate_dims) {
                out.warnings.push_back("state dimension " + std::to_string(k) +
                                       " has a zero-width declared range; excluded from coverage");
            }
        } else {
            out.warnings.push_back("state ranges not declared; coverage ratio skipped");
        }

        for (std::int64_t k : normalize_actions(d).degenerate_dims) {
            out.warnings.push_back("action dimension " + std::to_string(k) +
                                   " is constant; normalized to zero");
        }

        BehaviorConfig cfg = options.behavior;
        cfg.seed = seed;
        auto [policy, train] = train_behavior_policy(d, cfg);
        out.final_nll = train.final_nll;
        out.epochs_run = train.epochs_run;
        out.record.eas = eas(policy.stochasticity_profile(d));
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
        if (out.name.empty()) out.name = path.stem().string();
    }
    return out;
}

}  // namespace detail

/// Analyzes every dataset, in parallel up to `options.jobs`. A failure on
/// one dataset is recorded in its entry and does not abort the others.
/// Results are ordered by input order and seeded by base seed + index,
/// independent of the job count.
inline AnalysisReport analyze_datasets(const std::vector<std::filesystem::path>& paths,
                                       const AnalysisOptions& options) {
    if (paths.empty()) throw Error("analyze: at least one dataset path is required");
    AnalysisReport report;
    report.options = options;
    report.timestamp =
        options.pinned_timestamp.empty() ? detail::utc_timestamp() : options.pinned_timestamp;
    report.datasets.resize(paths.size());

    const int jobs = std::clamp(options.jobs, 1, static_cast<int>(paths.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < paths.size(); ++i) {
            report.datasets[i] =
                detail::analyze_one(paths[i], options, options.behavior.seed + i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < paths.size();
                     i = next.fetch_add(1)) {
                    report.datasets[i] =
                        detail::analyze_one(paths[i], options, options.behavior.seed + i);
                }
            });
        }
        for (auto& t : workers) t.join();
    }

    for (const auto& d : report.datasets) {
        if (d.ok) ++report.n_ok;
        else ++report.n_failed;
    }
    return report;
}

/// Attaches algorithm returns to a report: r_algo is normalized with each
/// dataset's own floor and converted to TRI against its mean normalized
/// return. Names must match the report's successful datasets exactly.
inline void attach_ground_truth(AnalysisReport& report,
                                const std::vector<std::pair<std::string, double>>& truth) {
    std::vector<std::string> report_names, truth_names;
    for (const auto& d : report.datasets) {
        if (d.ok) report_names.push_back(d.name);
    }
    for (const auto& [name, _] : truth) truth_names.push_back(name);
    std::sort(report_names.begin(), report_names.end());
    std::sort(truth_names.begin(), truth_names.end());
    if (report_names != truth_names) {
        std::string msg = "ground-truth names do not match report names;";
        for (const auto& n : truth_names) {
            if (!std::binary_search(report_names.begin(), report_names.end(), n)) {
                msg += " unknown: " + n + ";";
            }
        }
        for (const auto& n : report_names) {
            if (!std::binary_search(truth_names.begin(), truth_names.end(), n)) {
                msg += " missing: " + n + ";";
            }
        }
        throw Error(msg);
    }
    for (const auto& [name, r_algo] : truth) {
        for (auto& d : report.datasets) {
            if (d.ok && d.name == name) {
                d.record.r_algo = r_algo;
                d.record.tri = tri(r_algo - d.floor, d.mean_norm);
            }
        }
    }
}

inline RankTable rank_report(const AnalysisReport& report) {
    std::vector<IndicatorRecord> records;
    for (const auto& d : report.datasets) {
        if (d.ok) records.push_back(d.record);
    }
    return build_rank_table(records);
}

// ---------------------------------------------------------------------------
// Input files: ground truth and rank fixtures.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path,
                                                           const std::string& what) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + what + " file: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw Error(what + " file is empty: " + path.string());
    return rows;
}

inline int parse_rank_cell(const std::string& cell, const std::string& col, std::size_t row) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw Error("bad " + col + " value '" + cell + "' at data row " + std::to_string(row));
    }
}

}  // namespace detail

/// CSV `name,r_algo`.
inline std::vector<std::pair<std::string, double>> load_ground_truth_csv(
    const std::filesystem::path& path) {
    const auto rows = detail::read_csv_rows(path, "ground-truth");
    if (rows[0] != std::vector<std::string>{"name", "r_algo"}) {
        throw Error("ground-truth file must start with header 'name,r_algo': " + path.string());
    }
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) {
            throw Error("ground-truth row " + std::to_string(i) + " needs 2 fields");
        }
        try {
            out.emplace_back(rows[i][0], std::stod(rows[i][1]));
        } catch (const std::exception&) {
            throw Error("bad r_algo value '" + rows[i][1] + "' at data row " + std::to_string(i));
        }
    }
    return out;
}

struct FixtureRanks {
    std::vector<std::string> names;
    std::vector<int> eri_rank, eas_rank;
    std::optional<std::vector<int>> tri_rank;
};

/// CSV `name,eri_rank,eas_rank[,tri_rank]`.
inline FixtureRanks load_fixture_ranks_csv(const std::filesystem::path& path) {
    const auto rows = detail::read_csv_rows(path, "fixtures");
    const std::vector<std::string> base{"name", "eri_rank", "eas_rank"};
    const std::vector<std::string> with_tri{"name", "eri_rank", "eas_rank", "tri_rank"};
    const bool has_tri = rows[0] == with_tri;
    if (!has_tri && rows[0] != base) {
        throw Error("fixtures file must start with header 'name,eri_rank,eas_rank[,tri_rank]': " +
                    path.string());
    }
    FixtureRanks out;
    if (has_tri) out.tri_rank.emplace();
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::size_t want = has_tri ? 4 : 3;
        if (rows[i].size() != want) {
            throw Error("fixtures row " + std::to_string(i) + " needs " + std::to_string(want) +
                        " fields");
        }
        out.names.push_back(rows[i][0]);
        out.eri_rank.push_back(detail::parse_rank_cell(rows[i][1], "eri_rank", i));
        out.eas_rank.push_back(detail::parse_rank_cell(rows[i][2], "eas_rank", i));
        if (has_tri) out.tri_rank->push_back(detail::parse_rank_cell(rows[i][3], "tri_rank", i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Renderings.
// ---------------------------------------------------------------------------

namespace detail {

// All doubles in CSV/text pass through here so they match the JSON byte for
// byte.
inline std::string num(double v) { return nlohmann::json(v).dump(); }

}  // namespace detail

inline nlohmann::json options_to_json(const AnalysisOptions& o) {
    nlohmann::json j;
    j["epochs"] = o.behavior.epochs;
    j["batch_size"] = o.behavior.batch_size;
    j["learning_rate"] = o.behavior.learning_rate;
    j["beta1"] = o.behavior.beta1;
    j["beta2"] = o.behavior.beta2;
    j["adam_eps"] = o.behavior.adam_eps;
    j["hidden_widths"] = o.behavior.hidden_widths;
    j["log_std_min"] = o.behavior.log_std_min;
    j["log_std_max"] = o.behavior.log_std_max;
    j["sigma_reduction"] = o.behavior.sigma_reduction == SigmaReduction::max ? "max" : "mean";
    j["base_seed"] = o.behavior.seed;
    j["jobs"] = o.jobs;
    if (o.discount_override) j["discount_override"] = *o.discount_override;
    if (o.floor_override) j["return_floor_override"] = *o.floor_override;
    j["conventions"] = {
        {"eas_space", "pre-tanh standard deviation of the normalized action"},
        {"rank_order", "ascending; rank n-1 is the highest value"},
        {"coi_score", "2*rank(eri) + rank(eas), ties broken toward higher eas rank"},
        {"per_dataset_seed", "base_seed + input index"},
        {"top_half", "ranks >= floor(n/2)"},
    };
    return j;
}

inline nlohmann::json rank_table_to_json(const RankTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < t.size(); ++i) {
        nlohmann::json r;
        r["name"] = t.names[i];
        r["eri_rank"] = t.eri_rank[i];
        r["eas_rank"] = t.eas_rank[i];
        r["coi_rank"] = t.coi_rank[i];
        if (t.eri_values) r["eri"] = (*t.eri_values)[i];
        if (t.eas_values) r["eas"] = (*t.eas_values)[i];
        if (t.tri_rank) r["tri_rank"] = (*t.tri_rank)[i];
        if (t.tri_values) r["tri"] = (*t.tri_values)[i];
        if (t.split_coi) {
            r["tri_top_half"] = t.split_coi->reference_top[i];
            r["coi_top_half"] = t.split_coi->candidate_top[i];
        }
        rows.push_back(std::move(r));
    }
    nlohmann::json j;
    j["datasets"] = std::move(rows);
    if (t.rho_eri_tri) {
        j["spearman"] = {{"eri_tri", *t.rho_eri_tri},
                         {"eas_tri", *t.rho_eas_tri},
                         {"coi_tri", *t.rho_coi_tri}};
        j["half_split"] = {{"eri_hits", t.split_eri->hits},
                           {"eas_hits", t.split_eas->hits},
                           {"coi_hits", t.split_coi->hits},
                           {"n", static_cast<int>(t.size())}};
    }
    nlohmann::json ties = nlohmann::json::array();
    if (t.eri_ties) ties.push_back("eri");
    if (t.eas_ties) ties.push_back("eas");
    if (t.tri_ties) ties.push_back("tri");
    if (!ties.empty()) j["tie_warnings"] = std::move(ties);
    return j;
}

inline std::string rank_table_to_csv(const RankTable& t) {
    std::ostringstream os;
    os << "name,eri_rank,eas_rank,coi_rank";
    if (t.tri_rank) os << ",tri_rank";
    if (t.eri_values) os << ",eri,eas";
    if (t.tri_values) os << ",tri";
    if (t.split_coi) os << ",coi_top_half,tri_top_half";
    os << "\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        os << t.names[i] << "," << t.eri_rank[i] << "," << t.eas_rank[i] << "," << t.coi_rank[i];
        if (t.tri_rank) os << "," << (*t.tri_rank)[i];
        if (t.eri_values) {
            os << "," << detail::num((*t.eri_values)[i]) << "," << detail::num((*t.eas_values)[i]);
        }
        if (t.tri_values) os << "," << detail::num((*t.tri_values)[i]);
        if (t.split_coi) {
            os << "," << (t.split_coi->candidate_top[i] ? 1 : 0) << ","
               << (t.split_coi->reference_top[i] ? 1 : 0);
        }
        os << "\n";
    }
    if (t.rho_eri_tri) {
        os << "rho(eri,tri)," << detail::num(*t.rho_eri_tri) << "\n";
        os << "rho(eas,tri)," << detail::num(*t.rho_eas_tri) << "\n";
        os << "rho(coi,tri)," << detail::num(*t.rho_coi_tri) << "\n";
    }
    return os.str();
}

inline std::string rank_table_to_text(const RankTable& t) {
    // Rows ordered by TRI rank (descending) when ground truth is present,
    // otherwise by COI.
    std::vector<std::size_t> order(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (t.tri_rank) return (*t.tri_rank)[a] > (*t.tri_rank)[b];
        return t.coi_rank[a] > t.coi_rank[b];
    });

    std::size_t name_w = 4;
    for (const auto& n : t.names) name_w = std::max(name_w, n.size());

    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(name_w)) << "name" << std::right
       << std::setw(6) << "ERI" << std::setw(6) << "EAS" << std::setw(6) << "COI";
    if (t.tri_rank) os << std::setw(6) << "TRI" << "  top-half";
    os << "\n";
    for (std::size_t i : order) {
        os << std::left << std::setw(static_cast<int>(name_w)) << t.names[i] << std::right
           << std::setw(6) << t.eri_rank[i] << std::setw(6) << t.eas_rank[i] << std::setw(6)
           << t.coi_rank[i];
        if (t.tri_rank) {
            os << std::setw(6) << (*t.tri_rank)[i];
            os << "  " << (t.split_coi->candidate_top[i] ? "coi:top" : "coi:bot") << "/"
               << (t.split_coi->reference_top[i] ? "tri:top" : "tri:bot")
               << (t.split_coi->correct[i] ? "" : " *");
        }
        os << "\n";
    }
    if (t.rho_eri_tri) {
        os << "\nSpearman rho vs TRI:  ERI " << detail::num(*t.rho_eri_tri) << "  EAS "
           << detail::num(*t.rho_eas_tri) << "  COI " << detail::num(*t.rho_coi_tri) << "\n";
        os << "half-split agreement: ERI " << t.split_eri->hits << "/" << t.size() << "  EAS "
           << t.split_eas->hits << "/" << t.size() << "  COI " << t.split_coi->hits << "/"
           << t.size() << "\n";
    }
    if (t.eri_ties || t.eas_ties || t.tri_ties) {
        os << "warning: ties broken by name in:";
        if (t.eri_ties) os << " eri";
        if (t.eas_ties) os << " eas";
        if (t.tri_ties) os << " tri";
        os << "\n";
    }
    return os.str();
}

inline nlohmann::json report_to_json(const AnalysisReport& report, const RankTable* table) {
    nlohmann::json j;
    j["timestamp"] = report.timestamp;
    j["config"] = options_to_json(report.options);
    j["summary"] = {{"n_ok", report.n_ok}, {"n_failed", report.n_failed}};
    nlohmann::json ds = nlohmann::json::array();
    for (const auto& d : report.datasets) {
        nlohmann::json e;
        e["name"] = d.name;
        e["path"] = d.path;
        e["ok"] = d.ok;
        if (!d.ok) {
            e["error"] = d.error;
        } else {
            e["eri"] = d.record.eri;
            e["eas"] = d.record.eas;
            if (d.record.coverage) e["coverage"] = *d.record.coverage;
            if (d.record.r_algo) e["r_algo"] = *d.record.r_algo;
            if (d.record.tri) e["tri"] = *d.record.tri;
            e["return_floor"] = d.floor;
            e["floor_from_data"] = d.floor_from_data;
            e["mean_normalized_return"] = d.mean_norm;
            e["max_normalized_return"] = d.max_norm;
            e["n_transitions"] = d.n_transitions;
            e["n_trajectories"] = d.n_trajectories;
            e["final_nll"] = d.final_nll;
            e["epochs_run"] = d.epochs_run;
            e["seed"] = d.seed;
        }
        if (!d.warnings.empty()) e["warnings"] = d.warnings;
        ds.push_back(std::move(e));
    }
    j["datasets"] = std::move(ds);
    if (table) j["rank_table"] = rank_table_to_json(*table);
    return j;
}

inline std::string report_to_csv(const AnalysisReport& report) {
    std::ostringstream os;
    os << "name,ok,eri,eas,coverage,return_floor,floor_from_data,mean_normalized_return,"
          "n_transitions,n_trajectories,final_nll,seed,error\n";
    for (const auto& d : report.datasets) {
        os << d.name << "," << (d.ok ? 1 : 0) << ",";
        if (d.ok) {
            os << detail::num(d.record.eri) << "," << detail::num(d.record.eas) << ",";
            if (d.record.coverage) os << detail::num(*d.record.coverage);
            os << "," << detail::num(d.floor) << "," << (d.floor_from_data ? 1 : 0) << ","
               << detail::num(d.mean_norm) << "," << d.n_transitions << "," << d.n_trajectories
               << "," << detail::num(d.final_nll) << "," << d.seed << ",";
        } else {
            std::string msg = d.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            os << ",,,,,,,,," << msg;
        }
        os << "\n";
    }
    return os.str();
}

inline std::string report_to_text(const AnalysisReport& report) {
    std::ostringstream os;
    for (const auto& d : report.datasets) {
        if (!d.ok) {
            os << d.name << ": FAILED: " << d.error << "\n";
            continue;
        }
        os << d.name << " (" << d.n_transitions << " transitions, " << d.n_trajectories
           << " trajectories)\n";
        os << "  eri " << detail::num(d.record.eri) << "  eas " << detail::num(d.record.eas);
        if (d.record.coverage) os << "  coverage " << detail::num(*d.record.coverage);
        if (d.record.tri) os << "  tri " << detail::num(*d.record.tri);
        os << "\n";
        os << "  return floor " << detail::num(d.floor)
           << (d.floor_from_data ? " (observed minimum)" : " (declared)")
           << "  mean normalized return " << detail::num(d.mean_norm) << "\n";
        os << "  behavior fit: final nll " << detail::num(d.final_nll) << " after "
           << d.epochs_run << " epochs (seed " << d.seed << ")\n";
        for (const auto& w : d.warnings) os << "  warning: " << w << "\n";
    }
    os << "summary: " << report.n_ok << " ok, " << report.n_failed << " failed\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Selection.
// ---------------------------------------------------------------------------

struct SelectionEntry {
    std::string name;
    int coi_rank = 0;
    std::optional<bool> in_tri_top_half;
    std::optional<double> meta_return_value;
};

struct SelectionOptions {
    std::int64_t k = 0;
    // Payoff annotation, applied when delta_r is set.
    std::optional<double> assumed_delta_r;
    std::int64_t horizon = 0;
    double discount = 1.0;
    double default_deploy_cost = 0.0;
    double default_fixed_cost = 0.0;
};

inline std::vector<SelectionEntry> select_datasets(
    const RankTable& t, const SelectionOptions& opts,
    const std::vector<std::pair<double, double>>* costs = nullptr) {
    const auto picks = select_top_k(t, opts.k);
    std::vector<SelectionEntry> out;
    for (std::size_t idx : picks) {
        SelectionEntry e;
        e.name = t.names[idx];
        e.coi_rank = t.coi_rank[idx];
        if (t.split_coi) e.in_tri_top_half = t.split_coi->reference_top[idx];
        if (opts.assumed_delta_r) {
            double deploy = opts.default_deploy_cost;
            double fixed = opts.default_fixed_cost;
            if (costs) {
                deploy = (*costs)[idx].first;
                fixed = (*costs)[idx].second;
            }
            e.meta_return_value =
                meta_return(*opts.assumed_delta_r, deploy, fixed, opts.horizon, opts.discount);
        }
        out.push_back(std::move(e));
    }
    return out;
}

inline nlohmann::json selection_to_json(const std::vector<SelectionEntry>& sel) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : sel) {
        nlohmann::json r;
        r["name"] = e.name;
        r["coi_rank"] = e.coi_rank;
        if (e.in_tri_top_half) r["in_tri_top_half"] = *e.in_tri_top_half;
        if (e.meta_return_value) r["meta_return"] = *e.meta_return_value;
        rows.push_back(std::move(r));
    }
    return nlohmann::json{{"selected", std::move(rows)}};
}

inline std::string selection_to_text(const std::vector<SelectionEntry>& sel) {
    std::ostringstream os;
    for (std::size_t i = 0; i < sel.size(); ++i) {
        os << i + 1 << ". " << sel[i].name << "  (coi_rank " << sel[i].coi_rank;
        if (sel[i].in_tri_top_half) {
            os << (*sel[i].in_tri_top_half ? ", tri top half" : ", tri bottom half");
        }
        os << ")";
        if (sel[i].meta_return_value) {
            os << "  meta_return " << detail::num(*sel[i].meta_return_value);
        }
        os << "\n";
    }
    return os.str();
}

inline std::string selection_to_csv(const std::vector<SelectionEntry>& sel) {
    std::ostringstream os;
    os << "order,name,coi_rank";
    const bool tri = !sel.empty() && sel.front().in_tri_top_half.has_value();
    const bool mr = !sel.empty() && sel.front().meta_return_value.has_value();
    if (tri) os << ",in_tri_top_half";
    if (mr) os << ",meta_return";
    os << "\n";
    for (std::size_t i = 0; i < sel.size(); ++i) {
        os << i + 1 << "," << sel[i].name << "," << sel[i].coi_rank;
        if (tri) os << "," << (*sel[i].in_tri_top_half ? 1 : 0);
        if (mr) os << "," << detail::num(*sel[i].meta_return_value);
        os << "\n";
    }
    return os.str();
}

}  // namespace dqi
