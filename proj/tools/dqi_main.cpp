// dqi: offline RL dataset quality indicators (ERI, EAS, COI) from transition
// files, with rank validation against ground-truth returns and payoff-based
// selection.
//
// Exit codes: 0 success, 2 partial success (some datasets failed), 1 fatal.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dqi/behavior.hpp"
#include "dqi/dataset.hpp"
#include "dqi/ranking.hpp"
#include "dqi/report.hpp"
#include "dqi/synth.hpp"

namespace {

struct CommonOpts {
    int epochs = 50;
    int batch_size = 256;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string sigma_reduction = "mean";
    double discount = 1.0;
    bool has_discount = false;
    double return_floor = 0.0;
    bool has_return_floor = false;
    std::string format = "text";
    std::string pin_timestamp;
    std::string output;
    std::string ground_truth;
    std::string fixtures;
    std::string config_file;
    std::vector<std::string> paths;
};

void apply_config_file(const std::string& path, CommonOpts& o) {
    std::ifstream in(path);
    if (!in) throw dqi::Error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw dqi::Error("malformed config file " + path + ": " + e.what());
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "epochs") o.epochs = value.get<int>();
        else if (key == "batch_size") o.batch_size = value.get<int>();
        else if (key == "learning_rate") o.learning_rate = value.get<double>();
        else if (key == "seed") o.seed = value.get<std::uint64_t>();
        else if (key == "jobs") o.jobs = value.get<int>();
        else if (key == "sigma_reduction") o.sigma_reduction = value.get<std::string>();
        else if (key == "discount") { o.discount = value.get<double>(); o.has_discount = true; }
        else if (key == "return_floor") {
            o.return_floor = value.get<double>();
            o.has_return_floor = true;
        } else if (key == "format") o.format = value.get<std::string>();
        else throw dqi::Error("unknown config key: " + key);
    }
}

dqi::AnalysisOptions make_analysis_options(const CommonOpts& o) {
    dqi::AnalysisOptions opts;
    opts.behavior.epochs = o.epochs;
    opts.behavior.batch_size = o.batch_size;
    opts.behavior.learning_rate = o.learning_rate;
    opts.behavior.seed = o.seed;
    if (o.sigma_reduction == "max") {
        opts.behavior.sigma_reduction = dqi::SigmaReduction::max;
    } else if (o.sigma_reduction == "mean") {
        opts.behavior.sigma_reduction = dqi::SigmaReduction::mean;
    } else {
        throw dqi::Error("unknown sigma reduction: " + o.sigma_reduction);
    }
    opts.jobs = o.jobs;
    if (o.has_discount) opts.discount_override = o.discount;
    if (o.has_return_floor) opts.floor_override = o.return_floor;
    opts.pinned_timestamp = o.pin_timestamp;
    return opts;
}

void write_output(const std::string& text, const std::string& output) {
    if (output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(output);
    if (!out) throw dqi::Error("cannot write output file: " + output);
    out << text;
}

std::vector<std::filesystem::path> to_paths(const std::vector<std::string>& in) {
    return {in.begin(), in.end()};
}

// Adds the flags shared by analyze, rank, and select. `config` is prescanned
// from argv before parsing so explicit flags override file values.
void add_common_flags(CLI::App* sub, CommonOpts& o, bool with_training) {
    sub->add_option("--config", o.config_file,
                    "JSON config file; explicit flags take precedence");
    if (with_training) {
        sub->add_option("--epochs", o.epochs, "training epochs")->capture_default_str();
        sub->add_option("--batch-size", o.batch_size, "minibatch size")->capture_default_str();
        sub->add_option("--learning-rate", o.learning_rate, "optimizer step size")
            ->capture_default_str();
        sub->add_option("--seed", o.seed, "base seed; dataset i uses seed + i")
            ->capture_default_str();
        sub->add_option("--jobs", o.jobs, "max concurrent dataset analyses")
            ->capture_default_str();
        sub->add_option("--sigma-reduction", o.sigma_reduction,
                        "reduce per-dimension sigma by 'mean' or 'max'")
            ->check(CLI::IsMember({"mean", "max"}))
            ->capture_default_str();
        sub->add_option("--discount", o.discount, "override the dataset discount factor")
            ->check(CLI::Range(1e-12, 1.0));
        sub->add_option("--return-floor", o.return_floor,
                        "override the return floor for every dataset");
        sub->add_option("--pin-timestamp", o.pin_timestamp,
                        "fixed timestamp string for reproducible reports");
    }
    sub->add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"text", "json", "csv"}))
        ->capture_default_str();
    sub->add_option("-o,--output", o.output, "write the report here instead of stdout");
}

void finish_common(CLI::App* sub, CommonOpts& o) {
    if (sub->count("--discount")) o.has_discount = true;
    if (sub->count("--return-floor")) o.has_return_floor = true;
}

int run_analyze(CLI::App* sub, CommonOpts& o) {
    finish_common(sub, o);
    auto report = dqi::analyze_datasets(to_paths(o.paths), make_analysis_options(o));
    if (!o.ground_truth.empty()) {
        if (report.n_failed == 0) {
            dqi::attach_ground_truth(report, dqi::load_ground_truth_csv(o.ground_truth));
        } else {
            std::cerr << "note: ground truth not attached; " << report.n_failed
                      << " dataset(s) failed\n";
        }
    }
    std::string text;
    if (o.format == "json") text = dqi::report_to_json(report, nullptr).dump(2) + "\n";
    else if (o.format == "csv") text = dqi::report_to_csv(report);
    else text = dqi::report_to_text(report);
    write_output(text, o.output);
    if (report.n_ok == 0) {
        std::cerr << "error: no dataset could be analyzed\n";
        return 1;
    }
    return report.n_failed > 0 ? 2 : 0;
}

// Shared by rank and select: either loads fixture rank columns or analyzes
// datasets. Cost pairs (deploy, fixed) align with the table rows.
struct TableSource {
    dqi::RankTable table;
    std::optional<dqi::AnalysisReport> report;
    std::vector<std::pair<double, double>> costs;
};

TableSource build_table(CLI::App* sub, CommonOpts& o) {
    finish_common(sub, o);
    TableSource src;
    if (!o.fixtures.empty()) {
        const auto fx = dqi::load_fixture_ranks_csv(o.fixtures);
        src.table = dqi::build_rank_table_from_ranks(fx.names, fx.eri_rank, fx.eas_rank,
                                                     fx.tri_rank);
        src.costs.assign(fx.names.size(), {0.0, 0.0});
        return src;
    }
    if (o.paths.empty()) {
        throw dqi::Error("rank/select needs dataset paths or --fixtures");
    }
    auto report = dqi::analyze_datasets(to_paths(o.paths), make_analysis_options(o));
    if (!o.ground_truth.empty()) {
        dqi::attach_ground_truth(report, dqi::load_ground_truth_csv(o.ground_truth));
    }
    src.table = dqi::rank_report(report);
    for (const auto& d : report.datasets) {
        if (d.ok) src.costs.emplace_back(d.deploy_cost, d.fixed_cost);
    }
    src.report = std::move(report);
    return src;
}

int run_rank(CLI::App* sub, CommonOpts& o) {
    auto src = build_table(sub, o);
    std::string text;
    if (o.format == "json") {
        text = src.report ? dqi::report_to_json(*src.report, &src.table).dump(2) + "\n"
                          : dqi::rank_table_to_json(src.table).dump(2) + "\n";
    } else if (o.format == "csv") {
        text = dqi::rank_table_to_csv(src.table);
    } else {
        text = dqi::rank_table_to_text(src.table);
    }
    write_output(text, o.output);
    return src.report && src.report->n_failed > 0 ? 2 : 0;
}

struct SelectFlags {
    std::int64_t k = 0;
    double assumed_delta_r = 0.0;
    bool has_delta_r = false;
    std::int64_t horizon = 0;
    double payoff_discount = 1.0;
    double deploy_cost = 0.0;
    bool has_deploy = false;
    double fixed_cost = 0.0;
    bool has_fixed = false;
};

int run_select(CLI::App* sub, CommonOpts& o, SelectFlags& f) {
    auto src = build_table(sub, o);
    if (sub->count("--assumed-delta-r")) f.has_delta_r = true;
    if (sub->count("--deploy-cost")) f.has_deploy = true;
    if (sub->count("--fixed-cost")) f.has_fixed = true;

    dqi::SelectionOptions sopts;
    sopts.k = f.k;
    if (f.has_delta_r) sopts.assumed_delta_r = f.assumed_delta_r;
    sopts.horizon = f.horizon;
    sopts.discount = f.payoff_discount;
    for (auto& [deploy, fixed] : src.costs) {
        if (f.has_deploy) deploy = f.deploy_cost;
        if (f.has_fixed) fixed = f.fixed_cost;
    }
    const auto sel = dqi::select_datasets(src.table, sopts, &src.costs);
    std::string text;
    if (o.format == "json") text = dqi::selection_to_json(sel).dump(2) + "\n";
    else if (o.format == "csv") text = dqi::selection_to_csv(sel);
    else text = dqi::selection_to_text(sel);
    write_output(text, o.output);
    return src.report && src.report->n_failed > 0 ? 2 : 0;
}

struct SynthFlags {
    dqi::SynthConfig config;
    std::string mean_fn = "zero";
    std::string reward_fn = "action-quadratic";
    double sigma2 = 0.0;
    bool has_sigma2 = false;
    std::string output;
};

int run_gen_synth(CLI::App* sub, SynthFlags& f) {
    f.config.mean_fn = dqi::parse_mean_fn(f.mean_fn);
    f.config.reward_fn = dqi::parse_reward_fn(f.reward_fn);
    if (sub->count("--sigma2")) f.config.sigma_true_2 = f.sigma2;
    if (sub->count("--name") == 0) {
        f.config.name = std::filesystem::path(f.output).stem().string();
    }
    auto [dataset, truth] = dqi::generate_synth(f.config);
    dqi::save_dataset(dataset, f.output);

    nlohmann::json j;
    j["sigma_true"] = truth.sigma_true;
    if (truth.sigma_true_2) {
        j["sigma_true_2"] = *truth.sigma_true_2;
        j["mixture_fraction"] = truth.mixture_fraction;
    }
    j["empirical_pretanh_std"] = truth.empirical_pretanh_std;
    j["empirical_mean_return"] = truth.empirical_mean_return;
    if (truth.analytic_mean_return) j["analytic_mean_return"] = *truth.analytic_mean_return;

    std::filesystem::path truth_path(f.output);
    truth_path.replace_extension(".truth.json");
    std::ofstream tf(truth_path);
    if (!tf) throw dqi::Error("cannot write ground truth file: " + truth_path.string());
    tf << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return 0;
}

struct GradCheckFlags {
    std::uint64_t seed = 0;
    int points = 10;
    int batch = 5;
    std::int64_t state_dim = 4;
    std::int64_t action_dim = 2;
    std::vector<int> widths = {32, 32};
    double h = 1e-4;
    double tolerance = 1e-3;
};

int run_check_gradients(const GradCheckFlags& f) {
    double worst = 0.0;
    for (int p = 0; p < f.points; ++p) {
        dqi::BehaviorConfig cfg;
        cfg.hidden_widths = f.widths;
        cfg.seed = f.seed + static_cast<std::uint64_t>(p);
        dqi::BehaviorPolicy policy(f.state_dim, f.action_dim, cfg);

        dqi::Rng rng(cfg.seed ^ 0xabcdef12345678ull);
        // Nudge every tensor off its init so biases are nonzero too.
        for (auto& t : policy.tensors()) {
            for (std::int64_t r = 0; r < t.rows(); ++r) {
                for (std::int64_t c = 0; c < t.cols(); ++c) {
                    t(r, c) += rng.uniform(-0.3, 0.3);
                }
            }
        }
        dqi::MatrixD x(f.state_dim, f.batch), u(f.action_dim, f.batch);
        dqi::VectorD cterms(f.batch);
        for (std::int64_t i = 0; i < f.batch; ++i) {
            for (std::int64_t k = 0; k < f.state_dim; ++k) x(k, i) = rng.normal();
            double c = 0.0;
            for (std::int64_t k = 0; k < f.action_dim; ++k) {
                u(k, i) = 0.6 * rng.normal();
                const double a = std::tanh(u(k, i));
                c += std::log1p(-a * a);
            }
            cterms[i] = c;
        }
        const auto res = dqi::check_gradients(policy, x, u, cterms, f.h);
        worst = std::max(worst, res.max_rel_error);
        std::cout << "point " << p << ": max relative error " << res.max_rel_error << " "
                  << (res.max_rel_error < f.tolerance ? "ok" : "FAIL") << "\n";
    }
    std::cout << "worst over " << f.points << " points: " << worst
              << (worst < f.tolerance ? " (within tolerance " : " (EXCEEDS tolerance ")
              << f.tolerance << ")\n";
    return worst < f.tolerance ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline RL dataset quality indicators: ERI, EAS, and their combination COI"};
    app.require_subcommand(1);

    CommonOpts common;
    // Config file defaults are applied before parsing so flags override them.
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        try {
            if (arg == "--config" && i + 1 < argc) apply_config_file(argv[i + 1], common);
            else if (arg.rfind("--config=", 0) == 0) apply_config_file(arg.substr(9), common);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }

    auto* analyze = app.add_subcommand(
        "analyze", "compute ERI, EAS, and coverage for one or more datasets");
    analyze->add_option("paths", common.paths, "dataset files (.json manifest or .csv)")
        ->required();
    add_common_flags(analyze, common, true);
    analyze->add_option("--ground-truth", common.ground_truth,
                        "CSV 'name,r_algo' with algorithm returns; adds TRI");

    auto* rank = app.add_subcommand("rank", "rank datasets by ERI, EAS, and COI");
    rank->add_option("paths", common.paths, "dataset files");
    add_common_flags(rank, common, true);
    auto* rank_gt = rank->add_option("--ground-truth", common.ground_truth,
                                     "CSV 'name,r_algo'; adds TRI ranks and Spearman rho");
    auto* rank_fx = rank->add_option(
        "--fixtures", common.fixtures,
        "CSV 'name,eri_rank,eas_rank[,tri_rank]' with precomputed rank columns");
    rank_fx->excludes(rank_gt);

    SelectFlags sf;
    auto* select = app.add_subcommand("select", "pick the top-k datasets by COI");
    select->add_option("paths", common.paths, "dataset files");
    add_common_flags(select, common, true);
    select->add_option("-k,--top-k", sf.k, "number of datasets to select")->required();
    auto* sel_gt = select->add_option("--ground-truth", common.ground_truth, "CSV 'name,r_algo'");
    select->add_option("--fixtures", common.fixtures, "precomputed rank columns")
        ->excludes(sel_gt);
    select->add_option("--assumed-delta-r", sf.assumed_delta_r,
                       "assumed per-period relative improvement for payoff annotation");
    select->add_option("--horizon", sf.horizon, "payoff horizon (periods)")
        ->check(CLI::NonNegativeNumber);
    select->add_option("--payoff-discount", sf.payoff_discount, "payoff discount factor")
        ->check(CLI::Range(1e-12, 1.0))
        ->capture_default_str();
    select->add_option("--deploy-cost", sf.deploy_cost, "override per-dataset deployment cost");
    select->add_option("--fixed-cost", sf.fixed_cost, "override per-dataset fixed cost");

    SynthFlags gf;
    auto* gen = app.add_subcommand("gen-synth",
                                   "generate a synthetic dataset with known stochasticity");
    gen->add_option("-o,--output", gf.output, "output manifest path (.json)")->required();
    gen->add_option("--state-dim", gf.config.state_dim)->capture_default_str();
    gen->add_option("--action-dim", gf.config.action_dim)->capture_default_str();
    gen->add_option("--trajectories", gf.config.n_trajectories)->capture_default_str();
    gen->add_option("--length", gf.config.trajectory_length, "transitions per trajectory")
        ->capture_default_str();
    gen->add_option("--mean-fn", gf.mean_fn, "zero | linear | sinusoidal")
        ->capture_default_str();
    gen->add_option("--sigma", gf.config.sigma_true, "pre-tanh action noise scale")
        ->capture_default_str();
    gen->add_option("--sigma2", gf.sigma2, "second policy sigma (mixture mode)");
    gen->add_option("--mixture-fraction", gf.config.mixture_fraction,
                    "probability a trajectory uses sigma2")
        ->capture_default_str();
    gen->add_option("--reward-fn", gf.reward_fn, "action-quadratic | state-linear")
        ->capture_default_str();
    gen->add_option("--seed", gf.config.seed)->capture_default_str();
    gen->add_option("--name", gf.config.name, "dataset name (default: output stem)");

    GradCheckFlags cf;
    auto* check = app.add_subcommand("check-gradients",
                                     "audit analytic NLL gradients against finite differences");
    check->add_option("--seed", cf.seed)->capture_default_str();
    check->add_option("--points", cf.points, "number of random parameter points")
        ->capture_default_str();
    check->add_option("--batch", cf.batch)->capture_default_str();
    check->add_option("--state-dim", cf.state_dim)->capture_default_str();
    check->add_option("--action-dim", cf.action_dim)->capture_default_str();
    check->add_option("--widths", cf.widths, "hidden layer widths")->capture_default_str();
    check->add_option("--step", cf.h, "finite-difference step")->capture_default_str();
    check->add_option("--tolerance", cf.tolerance, "max relative error allowed")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        if (analyze->parsed()) return run_analyze(analyze, common);
        if (rank->parsed()) return run_rank(rank, common);
        if (select->parsed()) return run_select(select, common, sf);
        if (gen->parsed()) return run_gen_synth(gen, gf);
        if (check->parsed()) return run_check_gradients(cf);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
