#include "biq/bench.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"biquality-learning benchmark harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir, results_path, dataset;
    int jobs = 0;
    bool resume = false;
    double p = 0, q = 0;

    auto* run = app.add_subcommand("run", "run the benchmark sweep");
    run->add_option("--config", config_path, "experiment config (json)")->required();
    run->add_option("--out", out_dir, "output directory (default: output_dir from the config)");
    run->add_option("--jobs", jobs, "worker threads (default: available parallelism)");
    run->add_flag("--resume", resume, "reuse completed cells from an existing results file");

    auto* report = app.add_subcommand("report", "aggregate results into tables and figures");
    report->add_option("--results", results_path, "results.csv produced by run")->required();
    report->add_option("--out", out_dir, "report output directory")->required();

    auto* inspect = app.add_subcommand("inspect-beta", "summarize stored beta dumps");
    inspect->add_option("--results", results_path, "results.csv produced by run")->required();
    inspect->add_option("--dataset", dataset, "dataset name")->required();
    inspect->add_option("--p", p, "trusted fraction")->required();
    inspect->add_option("--q", q, "label quality")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            biq::ExperimentConfig cfg = biq::load_experiment_config(config_path);
            biq::SweepOptions opt;
            opt.out_dir = out_dir;
            opt.jobs = jobs;
            opt.resume = resume;
            biq::run_sweep(cfg, opt, std::cout);
        } else if (report->parsed()) {
            biq::ResultsFile results = biq::read_results_file(results_path);
            biq::Aggregates agg = biq::aggregate(results.records);
            auto beta_dir = std::filesystem::path(results_path).parent_path() / "beta";
            biq::write_report(agg, beta_dir.string(), out_dir, std::cout);
        } else if (inspect->parsed()) {
            biq::inspect_beta(results_path, dataset, p, q, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
