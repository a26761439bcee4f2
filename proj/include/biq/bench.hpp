#pragma once

#include "biq/biquality.hpp"
#include "biq/stats.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace biq {

struct DatasetEntry {
    std::string name;
    std::string path;
    std::string format = "csv";  // "csv" or "libsvm"
    CsvOptions csv;
};

struct ExperimentConfig {
    std::vector<DatasetEntry> datasets;
    std::vector<NoiseKind> noise{NoiseKind::ncar, NoiseKind::nnar};
    std::vector<double> p_grid{0.02, 0.05, 0.10, 0.25};
    std::vector<double> q_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    int seeds = 5;
    std::vector<std::string> methods{"trusted", "mixed", "untrusted", "irbl", "glc", "rll"};
    SgdConfig sgd;
    std::string output_dir = "out";
};

ExperimentConfig load_experiment_config(const std::string& path);
void validate_config(const ExperimentConfig& config);

// Hash of everything that affects results (output_dir excluded); a results
// file carries it so resume can refuse a mismatched configuration.
std::uint64_t config_hash(const ExperimentConfig& config);

struct ResultRecord {
    std::string dataset;
    std::string method;
    std::string noise;
    double p = 0;
    double q = 0;
    std::uint64_t seed = 0;
    double accuracy = 0;  // meaningful only when ok
    double wall_time_s = 0;
    bool ok = true;
    std::string reason;
};

// Shortest decimal form that parses back to the same double; used for CSV
// cells and seed-derivation tags.
std::string format_double(double value);

void write_results_header(std::ostream& out, std::uint64_t hash);
void write_result_row(std::ostream& out, const ResultRecord& record);

struct ResultsFile {
    std::uint64_t hash = 0;
    std::vector<ResultRecord> records;
};
ResultsFile read_results_file(const std::string& path);

struct CellKey {
    std::string dataset;
    NoiseKind noise = NoiseKind::ncar;
    double p = 0;
    double q = 0;
    std::uint64_t seed = 0;
};

struct CellOutput {
    std::vector<ResultRecord> records;
    std::string beta_csv;  // populated when irbl completed
};

// Caches parsed datasets and the per-(dataset, seed) 80/20 split,
// standardization and NNAR total model; all cached values are pure functions
// of the config, so cells stay reproducible in isolation.
class CellRunner {
  public:
    explicit CellRunner(const ExperimentConfig& config);
    ~CellRunner();
    CellOutput run(const CellKey& key);

  private:
    struct Impl;
    Impl* impl_;
};

struct SweepOptions {
    std::string out_dir;
    int jobs = 0;  // <= 0: hardware concurrency
    bool resume = false;
};

struct SweepSummary {
    std::size_t cells_total = 0;
    std::size_t cells_reused = 0;
    std::size_t cells_run = 0;
    std::size_t failed_rows = 0;
    std::string results_path;
};

// Runs the full grid in canonical order (dataset, noise, p, q, seed), one
// row per cell-method. Rows are committed cell-atomically in canonical
// order, so an interrupted file is a clean prefix and resume only recomputes
// the remainder.
SweepSummary run_sweep(const ExperimentConfig& config, const SweepOptions& options,
                       std::ostream& log);

struct MeanStd {
    double mean = 0;
    double stddev = 0;
    int count = 0;
};

struct Table2Entry {
    NoiseKind noise;
    double p;
    std::string method;
    MeanStd accuracy_pct;  // over datasets of per-dataset means across q and seeds
};

struct CurvePoint {
    NoiseKind noise;
    double p, q;
    std::string method;
    MeanStd error_pct;  // over datasets of per-dataset means across seeds
};

struct WtlEntry {
    NoiseKind noise;
    double p, q;
    std::string method_a, method_b;
    TestOutcome test;  // win means method_a ranks higher across datasets
};

struct Aggregates {
    std::vector<std::string> datasets;
    std::vector<std::string> methods;
    std::vector<NoiseKind> noises;
    std::vector<double> p_grid, q_grid;
    std::vector<Table2Entry> table2;
    std::vector<CurvePoint> curves;
    std::vector<WtlEntry> wilcoxon;
    // Per noise kind, two rankings: rows = datasets (means across p, q,
    // seeds) and rows = dataset x p x q cells (means across seeds).
    std::vector<std::pair<NoiseKind, ScoreTable>> scores_datasets;
    std::vector<std::pair<NoiseKind, ScoreTable>> scores_cells;
    std::vector<std::string> warnings;
};

// Means over datasets of per-dataset seed means, failed rows excluded;
// datasets missing a method in scope are dropped from that aggregate with a
// warning.
Aggregates aggregate(const std::vector<ResultRecord>& records);

// CSV tables plus self-contained SVG figures (beta histogram and boxplots,
// error-vs-q curves, critical-difference diagrams, win/tie/loss grids).
// beta_dir may be empty or missing; beta figures are skipped then.
void write_report(const Aggregates& agg, const std::string& beta_dir, const std::string& out_dir,
                  std::ostream& log);

// Terminal summary of the stored beta dumps for one (dataset, p, q) slice.
void inspect_beta(const std::string& results_path, const std::string& dataset, double p, double q,
                  std::ostream& out);

}  // namespace biq
