#include "biq/bench.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace biq;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("tmp_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
};

ExperimentConfig mini_config(const TempDir& tmp) {
    Dataset blobs = testing::make_blobs(60, 3, 1.5, 2024);
    std::ofstream data(tmp.str("blobs.csv"));
    write_csv(blobs, data);
    data.close();

    ExperimentConfig cfg;
    DatasetEntry entry;
    entry.name = "blobs";
    entry.path = tmp.str("blobs.csv");
    cfg.datasets = {entry};
    cfg.noise = {NoiseKind::ncar};
    cfg.p_grid = {0.25};
    cfg.q_grid = {0.0, 1.0};
    cfg.seeds = 2;
    cfg.methods = {"trusted", "irbl"};
    cfg.sgd.learning_rate = 0.1;
    cfg.sgd.weight_decay = 1e-6;
    cfg.sgd.epochs = 10;
    cfg.sgd.batch_size = 16;
    cfg.sgd.seed = 0;
    cfg.output_dir = tmp.str("out");
    return cfg;
}

bool same_except_time(const ResultRecord& a, const ResultRecord& b) {
    return a.dataset == b.dataset && a.method == b.method && a.noise == b.noise && a.p == b.p &&
           a.q == b.q && a.seed == b.seed && a.ok == b.ok && a.accuracy == b.accuracy &&
           a.reason == b.reason;
}

// Minimal XML well-formedness: every opened tag closes in order.
bool xml_balanced(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t pos = 0;
    while ((pos = text.find('<', pos)) != std::string::npos) {
        std::size_t end = text.find('>', pos);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;
        if (tag.back() == '/') continue;  // self-closing
        if (tag[0] == '/') {
            std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else {
            std::size_t sp = tag.find_first_of(" \t\n");
            stack.push_back(sp == std::string::npos ? tag : tag.substr(0, sp));
        }
    }
    return stack.empty();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("format_double emits the shortest exact decimal form") {
    CHECK(format_double(0.25) == "0.25");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");

    Rng rng(3001);
    for (int trial = 0; trial < 500; ++trial) {
        double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(17)) - 8.0);
        std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(std::strtod(format_double(0.1 + 0.2).c_str(), nullptr) == 0.1 + 0.2);
}

TEST_CASE("result rows round-trip through the results file") {
    TempDir tmp("results_io");
    std::vector<ResultRecord> rows = {
        {"breast", "irbl", "ncar", 0.25, 0.5, 3, 0.9642, 1.25, true, ""},
        {"breast", "rll", "nnar", 0.05, 0.0, 0, 0.0, 0.75, false, "rll requires a binary problem"},
    };
    {
        std::ofstream out(tmp.str("results.csv"));
        write_results_header(out, 0xdeadbeefULL);
        for (const auto& r : rows) write_result_row(out, r);
    }
    ResultsFile back = read_results_file(tmp.str("results.csv"));
    CHECK(back.hash == 0xdeadbeefULL);
    REQUIRE(back.records.size() == 2);
    CHECK(back.records[0].accuracy == 0.9642);
    CHECK(back.records[0].ok);
    CHECK(back.records[0].p == 0.25);
    CHECK(back.records[0].seed == 3);
    CHECK(!back.records[1].ok);
    CHECK(back.records[1].reason == "rll requires a binary problem");
}

TEST_CASE("a torn final line is dropped, an interior one is an error") {
    TempDir tmp("results_torn");
    auto write_base = [&](const std::string& path, bool torn_middle) {
        std::ofstream out(path);
        write_results_header(out, 1);
        write_result_row(out, {"a", "trusted", "ncar", 0.25, 0.0, 0, 0.5, 0.1, true, ""});
        if (torn_middle) out << "a,trusted,ncar,0.25\n";
        write_result_row(out, {"a", "trusted", "ncar", 0.25, 1.0, 0, 0.75, 0.1, true, ""});
        if (!torn_middle) out << "a,trusted,ncar,0.25";  // interrupted write
    };

    write_base(tmp.str("tail.csv"), false);
    ResultsFile tail = read_results_file(tmp.str("tail.csv"));
    CHECK(tail.records.size() == 2);

    write_base(tmp.str("middle.csv"), true);
    CHECK_THROWS_AS(read_results_file(tmp.str("middle.csv")), ParseError);

    {
        std::ofstream out(tmp.str("noheader.csv"));
        out << "dataset,method\n";
    }
    CHECK_THROWS_AS(read_results_file(tmp.str("noheader.csv")), ParseError);
    CHECK_THROWS_AS(read_results_file(tmp.str("missing.csv")), ConfigError);
}

TEST_CASE("experiment configs load from json with defaults and overrides") {
    TempDir tmp("config_load");
    {
        std::ofstream out(tmp.str("cfg.json"));
        out << R"({
            "datasets": [
                {"name": "a", "path": "a.csv", "label_column": "label"},
                {"name": "b", "path": "b.libsvm", "format": "libsvm"},
                {"name": "c", "path": "c.csv", "label_column": 0, "delimiter": ";", "has_header": false}
            ],
            "noise": ["ncar"],
            "p_grid": [0.1, 0.25],
            "q_grid": [0, 0.5, 1],
            "seeds": 3,
            "methods": ["trusted", "irbl"],
            "sgd": {"learning_rate": 0.01, "epochs": 15, "seed": 9},
            "output_dir": "results"
        })";
    }
    ExperimentConfig cfg = load_experiment_config(tmp.str("cfg.json"));
    REQUIRE(cfg.datasets.size() == 3);
    CHECK(std::get<std::string>(cfg.datasets[0].csv.label_column) == "label");
    CHECK(cfg.datasets[1].format == "libsvm");
    CHECK(std::get<int>(cfg.datasets[2].csv.label_column) == 0);
    CHECK(cfg.datasets[2].csv.delimiter == ';');
    CHECK(!cfg.datasets[2].csv.has_header);
    CHECK(cfg.noise == std::vector<NoiseKind>{NoiseKind::ncar});
    CHECK(cfg.p_grid == std::vector<double>{0.1, 0.25});
    CHECK(cfg.seeds == 3);
    CHECK(cfg.sgd.learning_rate == 0.01);
    CHECK(cfg.sgd.epochs == 15);
    CHECK(cfg.sgd.seed == 9);
    CHECK(cfg.sgd.batch_size == 24);  // default kept
    CHECK(cfg.output_dir == "results");

    {
        std::ofstream out(tmp.str("bad.json"));
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_experiment_config(tmp.str("bad.json")), ConfigError);
    CHECK_THROWS_AS(load_experiment_config(tmp.str("absent.json")), ConfigError);
    {
        std::ofstream out(tmp.str("nods.json"));
        out << R"({"p_grid": [0.1]})";
    }
    CHECK_THROWS_AS(load_experiment_config(tmp.str("nods.json")), ConfigError);
}

TEST_CASE("validate_config rejects bad grids and methods") {
    TempDir tmp("config_validate");
    ExperimentConfig cfg = mini_config(tmp);
    validate_config(cfg);

    auto broken = [&](auto&& poke) {
        ExperimentConfig c = cfg;
        poke(c);
        CHECK_THROWS_AS(validate_config(c), ConfigError);
    };
    broken([](ExperimentConfig& c) { c.datasets.clear(); });
    broken([](ExperimentConfig& c) { c.datasets.push_back(c.datasets[0]); });
    broken([](ExperimentConfig& c) { c.datasets[0].format = "parquet"; });
    broken([](ExperimentConfig& c) { c.noise.clear(); });
    broken([](ExperimentConfig& c) { c.p_grid = {0.0}; });
    broken([](ExperimentConfig& c) { c.p_grid = {1.5}; });
    broken([](ExperimentConfig& c) { c.p_grid.clear(); });
    broken([](ExperimentConfig& c) { c.q_grid = {-0.1}; });
    broken([](ExperimentConfig& c) { c.q_grid.clear(); });
    broken([](ExperimentConfig& c) { c.seeds = 0; });
    broken([](ExperimentConfig& c) { c.methods = {"oracle"}; });
    broken([](ExperimentConfig& c) { c.methods = {"irbl", "irbl"}; });
    broken([](ExperimentConfig& c) { c.methods.clear(); });
    broken([](ExperimentConfig& c) { c.sgd.learning_rate = 0.0; });
    broken([](ExperimentConfig& c) { c.sgd.epochs = 0; });
}

TEST_CASE("config hash tracks the grids but not the output directory") {
    TempDir tmp("config_hash");
    ExperimentConfig cfg = mini_config(tmp);
    std::uint64_t h = config_hash(cfg);
    CHECK(config_hash(cfg) == h);

    ExperimentConfig moved = cfg;
    moved.output_dir = "elsewhere";
    CHECK(config_hash(moved) == h);

    ExperimentConfig more_q = cfg;
    more_q.q_grid.push_back(0.5);
    CHECK(config_hash(more_q) != h);
    ExperimentConfig other_seed = cfg;
    other_seed.sgd.seed = 1;
    CHECK(config_hash(other_seed) != h);
    ExperimentConfig fewer = cfg;
    fewer.methods = {"trusted"};
    CHECK(config_hash(fewer) != h);
}

TEST_CASE("a small sweep runs, repeats identically, and resumes from a prefix") {
    TempDir tmp("sweep");
    ExperimentConfig cfg = mini_config(tmp);
    SweepOptions opts;
    opts.jobs = 1;
    std::ostringstream log;

    opts.out_dir = tmp.str("outA");
    SweepSummary a = run_sweep(cfg, opts, log);
    CHECK(a.cells_total == 4);
    CHECK(a.cells_run == 4);
    CHECK(a.cells_reused == 0);
    CHECK(a.failed_rows == 0);

    ResultsFile ra = read_results_file(a.results_path);
    CHECK(ra.hash == config_hash(cfg));
    REQUIRE(ra.records.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        const ResultRecord& r = ra.records[i];
        CHECK(r.dataset == "blobs");
        CHECK(r.noise == "ncar");
        CHECK(r.p == 0.25);
        CHECK(r.method == (i % 2 == 0 ? "trusted" : "irbl"));
        CHECK(r.q == (i < 4 ? 0.0 : 1.0));
        CHECK(r.seed == (i / 2) % 2);
        CHECK(r.ok);
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
    }

    // beta dumps, one per cell since irbl is in scope
    for (const char* name : {"blobs_ncar_p0.25_q0_s0.csv", "blobs_ncar_p0.25_q0_s1.csv",
                             "blobs_ncar_p0.25_q1_s0.csv", "blobs_ncar_p0.25_q1_s1.csv"})
        CHECK(fs::exists(fs::path(tmp.str("outA")) / "beta" / name));

    // the trusted baseline cannot depend on q
    CHECK(ra.records[0].accuracy == ra.records[4].accuracy);
    CHECK(ra.records[2].accuracy == ra.records[6].accuracy);

    opts.out_dir = tmp.str("outB");
    SweepSummary b = run_sweep(cfg, opts, log);
    ResultsFile rb = read_results_file(b.results_path);
    REQUIRE(rb.records.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(same_except_time(ra.records[i], rb.records[i]));

    // a lone cell recomputed in isolation matches its sweep rows
    CellRunner runner(cfg);
    CellOutput solo = runner.run({"blobs", NoiseKind::ncar, 0.25, 1.0, 0});
    REQUIRE(solo.records.size() == 2);
    CHECK(same_except_time(solo.records[0], ra.records[4]));
    CHECK(same_except_time(solo.records[1], ra.records[5]));
    CHECK(!solo.beta_csv.empty());

    // truncate to the first complete cell, then resume
    {
        std::ifstream in(a.results_path);
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(in, line)) lines.push_back(line);
        in.close();
        std::ofstream out(a.results_path, std::ios::trunc);
        for (std::size_t i = 0; i < 4; ++i) out << lines[i] << '\n';  // header x2 + 1 cell
        out << lines[4].substr(0, 10);  // torn row
    }
    opts.out_dir = tmp.str("outA");
    opts.resume = true;
    SweepSummary c = run_sweep(cfg, opts, log);
    CHECK(c.cells_reused == 1);
    CHECK(c.cells_run == 3);
    ResultsFile rc = read_results_file(c.results_path);
    REQUIRE(rc.records.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(same_except_time(ra.records[i], rc.records[i]));

    // resume refuses a results file from a different configuration
    ExperimentConfig other = cfg;
    other.sgd.seed = 77;
    CHECK_THROWS_AS(run_sweep(other, opts, log), ConfigError);
}

TEST_CASE("aggregate reduces records and flags failures") {
    std::vector<ResultRecord> records = {
        {"a", "trusted", "ncar", 0.25, 0.0, 0, 0.8, 0.1, true, ""},
        {"a", "trusted", "ncar", 0.25, 0.0, 1, 0.9, 0.1, true, ""},
        {"b", "trusted", "ncar", 0.25, 0.0, 0, 0.7, 0.1, true, ""},
        {"b", "trusted", "ncar", 0.25, 0.0, 1, 0.5, 0.1, false, "diverged"},
    };
    Aggregates agg = aggregate(records);
    CHECK(agg.datasets == std::vector<std::string>{"a", "b"});
    CHECK(agg.methods == std::vector<std::string>{"trusted"});
    REQUIRE(agg.table2.size() == 1);
    // dataset a: (0.8+0.9)/2 = 0.85; dataset b: 0.7 (failed row excluded)
    CHECK(agg.table2[0].accuracy_pct.mean == doctest::Approx(77.5));
    CHECK(agg.table2[0].accuracy_pct.count == 2);
    REQUIRE(agg.curves.size() == 1);
    CHECK(agg.curves[0].error_pct.mean == doctest::Approx(100.0 - 77.5));
    bool flagged = false;
    for (const auto& w : agg.warnings) flagged = flagged || w.find("failed") != std::string::npos;
    CHECK(flagged);

    Aggregates single = aggregate({records[0]});
    REQUIRE(single.table2.size() == 1);
    CHECK(single.table2[0].accuracy_pct.mean == doctest::Approx(80.0));
    CHECK(single.table2[0].accuracy_pct.stddev == 0.0);
    CHECK(single.table2[0].accuracy_pct.count == 1);

    CHECK_THROWS_AS(aggregate({}), ConfigError);
}

TEST_CASE("reports render csv tables and balanced svg figures") {
    TempDir tmp("report");
    ExperimentConfig cfg = mini_config(tmp);
    SweepOptions opts;
    opts.jobs = 1;
    opts.out_dir = tmp.str("out");
    std::ostringstream log;
    run_sweep(cfg, opts, log);

    ResultsFile results = read_results_file(tmp.str("out") + "/results.csv");
    Aggregates agg = aggregate(results.records);
    write_report(agg, tmp.str("out") + "/beta", tmp.str("report"), log);

    for (const char* name :
         {"table2_ncar.csv", "error_vs_q_ncar.csv", "wilcoxon_ncar.csv", "scores_ncar_cells.csv",
          "ranks_ncar_cells.csv", "error_vs_q_ncar_p0.25.svg", "cd_ncar_cells.svg",
          "wtl_ncar_irbl_vs_trusted.svg", "beta_hist_ncar.csv", "beta_hist_ncar.svg",
          "beta_box_ncar.csv", "beta_box_ncar.svg"})
        CHECK(fs::exists(fs::path(tmp.str("report")) / name));

    for (const auto& entry : fs::directory_iterator(tmp.str("report"))) {
        if (entry.path().extension() != ".svg") continue;
        std::string svg = slurp(entry.path());
        CHECK(!svg.empty());
        CHECK(xml_balanced(svg));
    }

    std::ostringstream inspect;
    inspect_beta(tmp.str("out") + "/results.csv", "blobs", 0.25, 0.0, inspect);
    CHECK(inspect.str().find("ncar") != std::string::npos);
    CHECK(inspect.str().find("flipped") != std::string::npos);

    CHECK_THROWS_AS(inspect_beta(tmp.str("out") + "/results.csv", "blobs", 0.25, 0.4,
                                 inspect),
                    ConfigError);
    CHECK_THROWS_AS(inspect_beta(tmp.str("nodir") + "/results.csv", "blobs", 0.25, 0.0, inspect),
                    ConfigError);
}
