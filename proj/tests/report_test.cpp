#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dqi/report.hpp"
#include "dqi/synth.hpp"

namespace fs = std::filesystem;

namespace {

fs::path test_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("dqi_report_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_synth(const fs::path& dir, const std::string& name, double sigma,
                     std::uint64_t seed) {
    dqi::SynthConfig cfg;
    cfg.n_trajectories = 4;
    cfg.trajectory_length = 50;
    cfg.sigma_true = sigma;
    cfg.seed = seed;
    cfg.name = name;
    const fs::path path = dir / (name + ".json");
    dqi::save_dataset(dqi::generate_synth(cfg).first, path);
    return path;
}

fs::path write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    return path;
}

dqi::AnalysisOptions quick_options() {
    dqi::AnalysisOptions opts;
    opts.behavior.epochs = 2;
    opts.pinned_timestamp = "2026-01-01T00:00:00Z";
    return opts;
}

TEST(Analyze, ProducesCompleteRecordsPerDataset) {
    const auto dir = test_dir("basic");
    const auto p1 = write_synth(dir, "alpha", 0.2, 1);
    const auto p2 = write_synth(dir, "beta", 0.5, 2);

    const auto report = dqi::analyze_datasets({p1, p2}, quick_options());
    EXPECT_EQ(report.n_ok, 2);
    EXPECT_EQ(report.n_failed, 0);
    EXPECT_EQ(report.timestamp, "2026-01-01T00:00:00Z");
    ASSERT_EQ(report.datasets.size(), 2u);

    const auto& a = report.datasets[0];
    EXPECT_TRUE(a.ok);
    EXPECT_EQ(a.name, "alpha");
    EXPECT_EQ(a.n_transitions, 200);
    EXPECT_EQ(a.n_trajectories, 4);
    EXPECT_GT(a.record.eas, 0.0);
    EXPECT_GE(a.record.eri, 0.0);
    EXPECT_FALSE(a.floor_from_data);
    ASSERT_TRUE(a.coverage.has_value());
    EXPECT_GE(a.coverage->ratio, 0.0);
    EXPECT_LE(a.coverage->ratio, 1.0);
    EXPECT_EQ(a.epochs_run, 2);
    // Per-dataset seeds: base seed plus position.
    EXPECT_EQ(report.datasets[0].seed, quick_options().behavior.seed + 0);
    EXPECT_EQ(report.datasets[1].seed, quick_options().behavior.seed + 1);
}

TEST(Analyze, RequiresAtLeastOnePath) {
    EXPECT_THROW(dqi::analyze_datasets({}, quick_options()), dqi::Error);
}

TEST(Analyze, IsolatesPerDatasetFailures) {
    const auto dir = test_dir("isolate");
    const auto good = write_synth(dir, "good", 0.3, 1);
    const fs::path missing = dir / "missing.json";
    const auto good2 = write_synth(dir, "good2", 0.3, 2);

    const auto report = dqi::analyze_datasets({good, missing, good2}, quick_options());
    EXPECT_EQ(report.n_ok, 2);
    EXPECT_EQ(report.n_failed, 1);
    EXPECT_TRUE(report.datasets[0].ok);
    EXPECT_FALSE(report.datasets[1].ok);
    EXPECT_TRUE(report.datasets[2].ok);
    EXPECT_NE(report.datasets[1].error.find("missing.json"), std::string::npos);
    EXPECT_EQ(report.datasets[1].name, "missing");  // falls back to the stem
}

TEST(Analyze, ThreadCountDoesNotChangeResults) {
    const auto dir = test_dir("jobs");
    std::vector<fs::path> paths;
    for (int i = 0; i < 3; ++i) {
        paths.push_back(write_synth(dir, "d" + std::to_string(i), 0.2 + 0.1 * i, 10 + i));
    }
    auto opts = quick_options();
    opts.jobs = 1;
    const auto serial = dqi::analyze_datasets(paths, opts);
    opts.jobs = 3;
    const auto parallel = dqi::analyze_datasets(paths, opts);

    // The config echo records the jobs flag; the numbers must not move.
    const auto js = dqi::report_to_json(serial, nullptr)["datasets"].dump(2);
    const auto jp = dqi::report_to_json(parallel, nullptr)["datasets"].dump(2);
    EXPECT_EQ(js, jp);
}

TEST(Analyze, PinnedTimestampMakesReportsByteIdentical) {
    const auto dir = test_dir("pinned");
    const auto p = write_synth(dir, "alpha", 0.3, 1);
    const auto opts = quick_options();
    const auto r1 = dqi::analyze_datasets({p}, opts);
    const auto r2 = dqi::analyze_datasets({p}, opts);
    EXPECT_EQ(dqi::report_to_json(r1, nullptr).dump(2), dqi::report_to_json(r2, nullptr).dump(2));
    EXPECT_EQ(dqi::report_to_csv(r1), dqi::report_to_csv(r2));
    EXPECT_EQ(dqi::report_to_text(r1), dqi::report_to_text(r2));
}

TEST(GroundTruth, AttachFillsTriAndRanks) {
    const auto dir = test_dir("truth");
    std::vector<fs::path> paths;
    for (int i = 0; i < 3; ++i) {
        paths.push_back(write_synth(dir, "d" + std::to_string(i), 0.2 + 0.1 * i, 20 + i));
    }
    auto report = dqi::analyze_datasets(paths, quick_options());
    ASSERT_EQ(report.n_ok, 3);

    dqi::attach_ground_truth(report, {{"d0", -3.0}, {"d1", -5.0}, {"d2", -9.0}});
    std::vector<double> expected_tri;
    for (const auto& d : report.datasets) {
        ASSERT_TRUE(d.record.tri.has_value());
        ASSERT_TRUE(d.record.r_algo.has_value());
        // TRI normalizes the algorithm return with the dataset's own floor.
        EXPECT_DOUBLE_EQ(*d.record.tri,
                         (*d.record.r_algo - d.floor - d.mean_norm) / d.mean_norm);
        expected_tri.push_back(*d.record.tri);
    }
    const auto table = dqi::rank_report(report);
    ASSERT_TRUE(table.tri_rank.has_value());
    ASSERT_TRUE(table.rho_coi_tri.has_value());
    ASSERT_TRUE(table.split_coi.has_value());
    EXPECT_EQ(*table.tri_rank, dqi::rank_values(expected_tri).ranks);
}

TEST(GroundTruth, MismatchListsOffendingNames) {
    const auto dir = test_dir("mismatch");
    auto report = dqi::analyze_datasets({write_synth(dir, "alpha", 0.3, 1)}, quick_options());
    try {
        dqi::attach_ground_truth(report, {{"alpha", 1.0}, {"stranger", 2.0}});
        FAIL() << "expected mismatch error";
    } catch (const dqi::Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("unknown: stranger"), std::string::npos) << msg;
    }
    try {
        dqi::attach_ground_truth(report, {});
        FAIL() << "expected mismatch error";
    } catch (const dqi::Error& e) {
        EXPECT_NE(std::string(e.what()).find("missing: alpha"), std::string::npos);
    }
}

TEST(InputFiles, GroundTruthCsvParsesAndRejects) {
    const auto dir = test_dir("gt_csv");
    const auto good = write_file(dir / "gt.csv", "name,r_algo\na,1.5\nb,-2\n");
    const auto rows = dqi::load_ground_truth_csv(good);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].first, "a");
    EXPECT_DOUBLE_EQ(rows[0].second, 1.5);
    EXPECT_DOUBLE_EQ(rows[1].second, -2.0);

    EXPECT_THROW(dqi::load_ground_truth_csv(dir / "nope.csv"), dqi::Error);
    EXPECT_THROW(
        dqi::load_ground_truth_csv(write_file(dir / "h.csv", "dataset,r_algo\na,1\n")),
        dqi::Error);
    EXPECT_THROW(dqi::load_ground_truth_csv(write_file(dir / "v.csv", "name,r_algo\na,zap\n")),
                 dqi::Error);
    EXPECT_THROW(dqi::load_ground_truth_csv(write_file(dir / "n.csv", "name,r_algo\na\n")),
                 dqi::Error);
}

TEST(InputFiles, FixtureRanksCsvParsesBothShapes) {
    const auto dir = test_dir("fx_csv");
    const auto base =
        dqi::load_fixture_ranks_csv(write_file(dir / "b.csv", "name,eri_rank,eas_rank\nx,1,0\ny,0,1\n"));
    EXPECT_EQ(base.names, (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(base.eri_rank, (std::vector<int>{1, 0}));
    EXPECT_FALSE(base.tri_rank.has_value());

    const auto with_tri = dqi::load_fixture_ranks_csv(
        write_file(dir / "t.csv", "name,eri_rank,eas_rank,tri_rank\nx,1,0,1\ny,0,1,0\n"));
    ASSERT_TRUE(with_tri.tri_rank.has_value());
    EXPECT_EQ(with_tri.tri_rank->at(0), 1);

    EXPECT_THROW(
        dqi::load_fixture_ranks_csv(write_file(dir / "bad1.csv", "name,eri\nx,1\n")),
        dqi::Error);
    EXPECT_THROW(dqi::load_fixture_ranks_csv(
                     write_file(dir / "bad2.csv", "name,eri_rank,eas_rank\nx,one,0\n")),
                 dqi::Error);
    EXPECT_THROW(dqi::load_fixture_ranks_csv(
                     write_file(dir / "bad3.csv", "name,eri_rank,eas_rank\nx,1\n")),
                 dqi::Error);
}

TEST(Render, JsonAndCsvAgreeOnEveryDigit) {
    const auto dir = test_dir("digits");
    const auto report =
        dqi::analyze_datasets({write_synth(dir, "alpha", 0.37, 3)}, quick_options());
    ASSERT_EQ(report.n_ok, 1);
    const auto& d = report.datasets[0];

    const auto j = dqi::report_to_json(report, nullptr);
    const double eri_back = j["datasets"][0]["eri"].get<double>();
    const double eas_back = j["datasets"][0]["eas"].get<double>();
    EXPECT_EQ(eri_back, d.record.eri);  // shortest round-trip serialization
    EXPECT_EQ(eas_back, d.record.eas);

    const auto csv = dqi::report_to_csv(report);
    EXPECT_NE(csv.find(dqi::detail::num(d.record.eri)), std::string::npos);
    EXPECT_NE(csv.find(dqi::detail::num(d.record.eas)), std::string::npos);
}

TEST(Render, RankTableShowsEveryFormat) {
    const std::vector<std::string> names{"a", "b", "c", "d"};
    const auto table = dqi::build_rank_table_from_ranks(names, {3, 2, 1, 0}, {0, 1, 2, 3},
                                                        std::vector<int>{3, 2, 0, 1});
    const auto j = dqi::rank_table_to_json(table);
    ASSERT_EQ(j["datasets"].size(), 4u);
    EXPECT_TRUE(j.contains("spearman"));
    EXPECT_TRUE(j.contains("half_split"));

    const auto csv = dqi::rank_table_to_csv(table);
    EXPECT_NE(csv.find("name,"), std::string::npos);
    EXPECT_NE(csv.find("rho(eri,tri)"), std::string::npos);

    const auto text = dqi::rank_table_to_text(table);
    for (const auto& n : names) EXPECT_NE(text.find(n), std::string::npos);
    EXPECT_NE(text.find("rho"), std::string::npos);
}

TEST(Selection, PicksBestCoiAndAnnotatesPayoff) {
    const std::vector<std::string> names{"a", "b", "c", "d"};
    const auto table = dqi::build_rank_table_from_ranks(names, {3, 2, 1, 0}, {3, 2, 1, 0},
                                                        std::vector<int>{3, 2, 1, 0});
    dqi::SelectionOptions opts;
    opts.k = 2;
    opts.assumed_delta_r = 1.0;
    opts.horizon = 2;
    opts.discount = 0.5;
    const auto sel = dqi::select_datasets(table, opts);
    ASSERT_EQ(sel.size(), 2u);
    EXPECT_EQ(sel[0].name, "a");  // best combined rank first
    EXPECT_EQ(sel[1].name, "b");
    ASSERT_TRUE(sel[0].in_tri_top_half.has_value());
    EXPECT_TRUE(*sel[0].in_tri_top_half);
    // 1 + 0.5 + 0.25 with zero costs.
    ASSERT_TRUE(sel[0].meta_return_value.has_value());
    EXPECT_DOUBLE_EQ(*sel[0].meta_return_value, 1.75);

    const std::vector<std::pair<double, double>> costs{{0.5, 0.25}, {0, 0}, {0, 0}, {0, 0}};
    const auto sel2 = dqi::select_datasets(table, opts, &costs);
    EXPECT_DOUBLE_EQ(*sel2[0].meta_return_value, 1.0);

    EXPECT_NE(dqi::selection_to_text(sel).find("1. a"), std::string::npos);
    EXPECT_NE(dqi::selection_to_csv(sel).find("order,name,coi_rank,in_tri_top_half,meta_return"),
              std::string::npos);
    EXPECT_EQ(dqi::selection_to_json(sel)["selected"].size(), 2u);
}

}  // namespace
