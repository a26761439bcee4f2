#include "biq/bench.hpp"

#include "biq/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace biq {

namespace {

const std::vector<std::string> kKnownMethods = {"trusted", "mixed", "untrusted",
                                                "irbl", "glc", "rll"};

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string sanitize_reason(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, delim)) cells.push_back(cell);
    if (!line.empty() && line.back() == delim) cells.emplace_back();
    return cells;
}

constexpr const char* kResultsHeader = "dataset,method,noise,p,q,seed,accuracy,wall_time_s,status,reason";

std::string beta_file_name(const CellKey& key) {
    return key.dataset + "_" + noise_kind_name(key.noise) + "_p" + format_double(key.p) + "_q" +
           format_double(key.q) + "_s" + std::to_string(key.seed) + ".csv";
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ConfigError("config parse failed: " + std::string(e.what()));
    }

    ExperimentConfig cfg;
    try {
        if (!doc.contains("datasets")) throw ConfigError("config: missing 'datasets'");
        for (const auto& dj : doc.at("datasets")) {
            DatasetEntry e;
            e.name = dj.at("name").get<std::string>();
            e.path = dj.at("path").get<std::string>();
            e.format = dj.value("format", std::string("csv"));
            if (dj.contains("label_column")) {
                if (dj.at("label_column").is_number_integer())
                    e.csv.label_column = dj.at("label_column").get<int>();
                else
                    e.csv.label_column = dj.at("label_column").get<std::string>();
            }
            if (dj.contains("delimiter")) {
                std::string d = dj.at("delimiter").get<std::string>();
                if (d.size() != 1) throw ConfigError("config: delimiter must be one character");
                e.csv.delimiter = d[0];
            }
            if (dj.contains("has_header")) e.csv.has_header = dj.at("has_header").get<bool>();
            cfg.datasets.push_back(std::move(e));
        }
        if (doc.contains("noise")) {
            cfg.noise.clear();
            for (const auto& s : doc.at("noise"))
                cfg.noise.push_back(parse_noise_kind(s.get<std::string>()));
        }
        if (doc.contains("p_grid")) cfg.p_grid = doc.at("p_grid").get<std::vector<double>>();
        if (doc.contains("q_grid")) cfg.q_grid = doc.at("q_grid").get<std::vector<double>>();
        if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<int>();
        if (doc.contains("methods"))
            cfg.methods = doc.at("methods").get<std::vector<std::string>>();
        if (doc.contains("sgd")) {
            const auto& s = doc.at("sgd");
            cfg.sgd.learning_rate = s.value("learning_rate", cfg.sgd.learning_rate);
            cfg.sgd.weight_decay = s.value("weight_decay", cfg.sgd.weight_decay);
            cfg.sgd.epochs = s.value("epochs", cfg.sgd.epochs);
            cfg.sgd.batch_size = s.value("batch_size", cfg.sgd.batch_size);
            cfg.sgd.seed = s.value("seed", cfg.sgd.seed);
        }
        if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    validate_config(cfg);
    return cfg;
}

void validate_config(const ExperimentConfig& config) {
    if (config.datasets.empty()) throw ConfigError("config: no datasets");
    for (const auto& d : config.datasets) {
        if (d.name.empty()) throw ConfigError("config: dataset with empty name");
        if (d.format != "csv" && d.format != "libsvm")
            throw ConfigError("config: unknown format '" + d.format + "' for " + d.name);
        for (const auto& other : config.datasets)
            if (&other != &d && other.name == d.name)
                throw ConfigError("config: duplicate dataset name " + d.name);
    }
    if (config.noise.empty()) throw ConfigError("config: no noise kinds");
    if (config.p_grid.empty()) throw ConfigError("config: empty p grid");
    for (double p : config.p_grid)
        if (!(p > 0.0 && p <= 1.0)) throw ConfigError("config: p must lie in (0, 1]");
    if (config.q_grid.empty()) throw ConfigError("config: empty q grid");
    for (double q : config.q_grid)
        if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("config: q must lie in [0, 1]");
    if (config.seeds < 1) throw ConfigError("config: seeds must be >= 1");
    if (config.methods.empty()) throw ConfigError("config: no methods");
    for (const auto& m : config.methods) {
        bool known = false;
        for (const auto& k : kKnownMethods) known = known || k == m;
        if (!known) throw ConfigError("config: unknown method '" + m + "'");
        int copies = 0;
        for (const auto& other : config.methods) copies += other == m;
        if (copies > 1) throw ConfigError("config: duplicate method '" + m + "'");
    }
    if (config.sgd.learning_rate <= 0 || config.sgd.epochs <= 0 || config.sgd.batch_size <= 0 ||
        config.sgd.weight_decay < 0)
        throw ConfigError("config: bad sgd settings");
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    std::ostringstream canon;
    for (const auto& d : config.datasets) {
        canon << "ds:" << d.name << ':' << d.path << ':' << d.format << ':';
        if (std::holds_alternative<int>(d.csv.label_column))
            canon << std::get<int>(d.csv.label_column);
        else
            canon << std::get<std::string>(d.csv.label_column);
        canon << ':' << d.csv.delimiter << ':' << d.csv.has_header << ';';
    }
    canon << "|noise:";
    for (auto n : config.noise) canon << noise_kind_name(n) << ',';
    canon << "|p:";
    for (double p : config.p_grid) canon << format_double(p) << ',';
    canon << "|q:";
    for (double q : config.q_grid) canon << format_double(q) << ',';
    canon << "|seeds:" << config.seeds << "|methods:";
    for (const auto& m : config.methods) canon << m << ',';
    canon << "|sgd:" << format_double(config.sgd.learning_rate) << ','
          << format_double(config.sgd.weight_decay) << ',' << config.sgd.epochs << ','
          << config.sgd.batch_size << ',' << config.sgd.seed;

    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (char c : canon.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

void write_results_header(std::ostream& out, std::uint64_t hash) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    out << "# config " << buf << '\n' << kResultsHeader << '\n';
}

void write_result_row(std::ostream& out, const ResultRecord& r) {
    out << r.dataset << ',' << r.method << ',' << r.noise << ',' << format_double(r.p) << ','
        << format_double(r.q) << ',' << r.seed << ',';
    if (r.ok) out << format_double(r.accuracy);
    out << ',' << fixed3(r.wall_time_s) << ',' << (r.ok ? "ok" : "failed") << ','
        << sanitize_reason(r.reason) << '\n';
}

ResultsFile read_results_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open results file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    if (lines.size() < 2) throw ParseError(1, "results file: missing header");
    if (lines[0].rfind("# config ", 0) != 0)
        throw ParseError(1, "results file: missing config hash line");
    ResultsFile out;
    out.hash = std::strtoull(lines[0].c_str() + 9, nullptr, 16);
    if (lines[1] != kResultsHeader) throw ParseError(2, "results file: unexpected header");

    for (std::size_t i = 2; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        std::vector<std::string> cells = split_line(lines[i], ',');
        bool last = i + 1 == lines.size();
        auto malformed = [&](const std::string& why) -> bool {
            if (last) return true;  // interrupted write: drop the tail row
            throw ParseError(i + 1, "results file: " + why);
        };
        if (cells.size() != 10) {
            if (malformed("expected 10 cells")) break;
        }
        ResultRecord r;
        r.dataset = cells[0];
        r.method = cells[1];
        r.noise = cells[2];
        char* end = nullptr;
        r.p = std::strtod(cells[3].c_str(), &end);
        if (end == cells[3].c_str()) {
            if (malformed("bad p")) break;
        }
        r.q = std::strtod(cells[4].c_str(), &end);
        if (end == cells[4].c_str()) {
            if (malformed("bad q")) break;
        }
        r.seed = std::strtoull(cells[5].c_str(), nullptr, 10);
        r.ok = cells[8] == "ok";
        if (!r.ok && cells[8] != "failed") {
            if (malformed("bad status")) break;
        }
        if (r.ok) {
            r.accuracy = std::strtod(cells[6].c_str(), &end);
            if (end == cells[6].c_str()) {
                if (malformed("missing accuracy")) break;
            }
        }
        r.wall_time_s = std::strtod(cells[7].c_str(), nullptr);
        r.reason = cells[9];
        out.records.push_back(std::move(r));
    }
    return out;
}

struct CellRunner::Impl {
    ExperimentConfig cfg;

    struct Prepared {
        Dataset train, test;
    };

    std::mutex mu_raw, mu_prepared, mu_ftotal;
    std::map<std::string, Dataset> raw;
    std::map<std::pair<std::string, std::uint64_t>, Prepared> prepared;
    std::map<std::pair<std::string, std::uint64_t>, CalibratedModel> f_total;

    const DatasetEntry& entry_for(const std::string& name) const {
        for (const auto& e : cfg.datasets)
            if (e.name == name) return e;
        throw ConfigError("unknown dataset: " + name);
    }

    const Dataset& raw_for(const DatasetEntry& e) {
        std::lock_guard lock(mu_raw);
        auto it = raw.find(e.name);
        if (it == raw.end())
            it = raw.emplace(e.name, load_dataset(e.path, e.format, e.csv)).first;
        return it->second;
    }

    const Prepared& prepared_for(const DatasetEntry& e, std::uint64_t seed) {
        {
            std::lock_guard lock(mu_prepared);
            auto it = prepared.find({e.name, seed});
            if (it != prepared.end()) return it->second;
        }
        const Dataset& full = raw_for(e);
        SplitResult split80 = stratified_split(
            full, 0.8, derive_seed(cfg.sgd.seed, "split80." + e.name + ".s" + std::to_string(seed)));
        Standardized z = standardize(split80.first, {split80.second});
        Prepared value{std::move(z.train), std::move(z.others[0])};
        std::lock_guard lock(mu_prepared);
        return prepared.emplace(std::make_pair(e.name, seed), std::move(value)).first->second;
    }

    const CalibratedModel& f_total_for(const DatasetEntry& e, std::uint64_t seed) {
        {
            std::lock_guard lock(mu_ftotal);
            auto it = f_total.find({e.name, seed});
            if (it != f_total.end()) return it->second;
        }
        const Prepared& prep = prepared_for(e, seed);
        SgdConfig cfg_fit = cfg.sgd;
        cfg_fit.seed = derive_seed(cfg.sgd.seed, "ftotal." + e.name + ".s" + std::to_string(seed));
        CalibratedModel model = fit_calibrated(prep.train, Vector::Ones(prep.train.n_samples()),
                                               cfg_fit, LossKind::logistic);
        std::lock_guard lock(mu_ftotal);
        return f_total.emplace(std::make_pair(e.name, seed), std::move(model)).first->second;
    }
};

CellRunner::CellRunner(const ExperimentConfig& config) : impl_(new Impl) {
    impl_->cfg = config;
}

CellRunner::~CellRunner() { delete impl_; }

namespace {

CalibratedModel fit_method(const std::string& name, const BiqualitySplit& split,
                           const SgdConfig& sgd, BetaWeights* beta) {
    if (name == "irbl") return irbl_fit(split, sgd, beta);
    if (name == "glc") return glc_fit(split, sgd);
    if (name == "rll") return rll_fit(split, sgd);
    return baseline_fit(split, parse_baseline_kind(name), sgd);
}

}  // namespace

CellOutput CellRunner::run(const CellKey& key) {
    const ExperimentConfig& cfg = impl_->cfg;
    CellOutput out;
    const std::string stag = std::to_string(key.seed);
    const std::string ptag = format_double(key.p);
    const std::string qtag = format_double(key.q);
    const std::string nname = noise_kind_name(key.noise);

    auto base_record = [&](const std::string& method) {
        ResultRecord r;
        r.dataset = key.dataset;
        r.method = method;
        r.noise = nname;
        r.p = key.p;
        r.q = key.q;
        r.seed = key.seed;
        return r;
    };

    BiqualitySplit noisy;
    std::vector<CorruptionRecord> corruption;
    try {
        const DatasetEntry& entry = impl_->entry_for(key.dataset);
        const Impl::Prepared& prep = impl_->prepared_for(entry, key.seed);
        BiqualitySplit split = make_biquality(
            prep.train, prep.test, key.p,
            derive_seed(cfg.sgd.seed, "biq." + key.dataset + ".s" + stag + ".p" + ptag));
        CorruptionResult corrupted;
        if (key.noise == NoiseKind::ncar) {
            corrupted = ncar_corrupt(
                split.untrusted, key.q,
                derive_seed(cfg.sgd.seed, "noise." + key.dataset + "." + nname + ".s" + stag +
                                              ".p" + ptag + ".q" + qtag));
        } else {
            const CalibratedModel& f_total = impl_->f_total_for(entry, key.seed);
            corrupted = nnar_corrupt(
                split.untrusted, f_total, key.q,
                derive_seed(cfg.sgd.seed, "noise." + key.dataset + "." + nname + ".s" + stag +
                                              ".p" + ptag + ".q" + qtag));
        }
        noisy = std::move(split);
        noisy.untrusted = std::move(corrupted.data);
        corruption = std::move(corrupted.records);
    } catch (const std::exception& e) {
        for (const auto& method : cfg.methods) {
            ResultRecord r = base_record(method);
            r.ok = false;
            r.reason = e.what();
            out.records.push_back(std::move(r));
        }
        return out;
    }

    for (const auto& method : cfg.methods) {
        ResultRecord r = base_record(method);
        SgdConfig fit_cfg = cfg.sgd;
        fit_cfg.seed = derive_seed(cfg.sgd.seed,
                                   "fit." + key.dataset + ".s" + stag + ".p" + ptag + "." + method);
        auto t0 = std::chrono::steady_clock::now();
        try {
            BetaWeights beta;
            BetaWeights* beta_ptr = method == "irbl" ? &beta : nullptr;
            CalibratedModel model = fit_method(method, noisy, fit_cfg, beta_ptr);
            r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            r.accuracy = accuracy(model, noisy.test);
            if (beta_ptr != nullptr) {
                std::ostringstream beta_out;
                write_beta_csv(beta, corruption, beta_out);
                out.beta_csv = beta_out.str();
            }
        } catch (const std::exception& e) {
            r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            r.ok = false;
            r.reason = e.what();
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

namespace {

std::vector<CellKey> canonical_cells(const ExperimentConfig& cfg) {
    std::vector<CellKey> cells;
    for (const auto& ds : cfg.datasets)
        for (auto noise : cfg.noise)
            for (double p : cfg.p_grid)
                for (double q : cfg.q_grid)
                    for (int seed = 0; seed < cfg.seeds; ++seed)
                        cells.push_back({ds.name, noise, p, q, static_cast<std::uint64_t>(seed)});
    return cells;
}

// Longest canonical prefix of complete cells already present in the file;
// anything after the first mismatch is recomputed.
std::vector<std::vector<ResultRecord>> reusable_prefix(const ExperimentConfig& cfg,
                                                       const std::vector<CellKey>& cells,
                                                       const std::vector<ResultRecord>& rows) {
    std::vector<std::vector<ResultRecord>> reused;
    std::size_t idx = 0;
    for (const auto& cell : cells) {
        if (idx + cfg.methods.size() > rows.size()) break;
        std::vector<ResultRecord> group;
        bool match = true;
        for (const auto& method : cfg.methods) {
            const ResultRecord& r = rows[idx + group.size()];
            if (r.dataset != cell.dataset || r.noise != noise_kind_name(cell.noise) ||
                r.method != method || r.p != cell.p || r.q != cell.q || r.seed != cell.seed) {
                match = false;
                break;
            }
            group.push_back(r);
        }
        if (!match) break;
        reused.push_back(std::move(group));
        idx += cfg.methods.size();
    }
    return reused;
}

}  // namespace

SweepSummary run_sweep(const ExperimentConfig& config, const SweepOptions& options,
                       std::ostream& log) {
    validate_config(config);
    const std::uint64_t hash = config_hash(config);
    const fs::path out_dir = options.out_dir.empty() ? fs::path(config.output_dir)
                                                     : fs::path(options.out_dir);
    fs::create_directories(out_dir);
    bool want_beta = false;
    for (const auto& m : config.methods) want_beta = want_beta || m == "irbl";
    const fs::path beta_dir = out_dir / "beta";
    if (want_beta) fs::create_directories(beta_dir);
    const fs::path results_path = out_dir / "results.csv";

    const std::vector<CellKey> cells = canonical_cells(config);
    std::vector<std::vector<ResultRecord>> reused;
    if (options.resume && fs::exists(results_path)) {
        ResultsFile previous = read_results_file(results_path.string());
        if (previous.hash != hash)
            throw ConfigError("existing results belong to a different configuration; "
                              "remove " + results_path.string() + " or change --out");
        reused = reusable_prefix(config, cells, previous.records);
        log << "resume: reusing " << reused.size() << " of " << cells.size() << " cells\n";
    }

    std::ofstream fout(results_path, std::ios::trunc);
    if (!fout) throw ConfigError("cannot write results file: " + results_path.string());
    write_results_header(fout, hash);

    SweepSummary summary;
    summary.cells_total = cells.size();
    summary.cells_reused = reused.size();
    summary.results_path = results_path.string();
    for (const auto& group : reused)
        for (const auto& r : group) {
            if (!r.ok) ++summary.failed_rows;
            write_result_row(fout, r);
        }
    fout.flush();

    const std::size_t prefix = reused.size();
    const std::size_t n_todo = cells.size() - prefix;
    summary.cells_run = n_todo;

    CellRunner runner(config);
    auto commit = [&](std::size_t i, CellOutput& out) {
        const CellKey& key = cells[prefix + i];
        if (!out.beta_csv.empty()) {
            std::ofstream bout(beta_dir / beta_file_name(key));
            bout << out.beta_csv;
        }
        for (const auto& r : out.records) {
            if (!r.ok) ++summary.failed_rows;
            write_result_row(fout, r);
        }
        fout.flush();
        if (key.q == config.q_grid.back() &&
            key.seed == static_cast<std::uint64_t>(config.seeds - 1))
            log << "done " << key.dataset << ' ' << noise_kind_name(key.noise) << " p="
                << format_double(key.p) << " (" << (prefix + i + 1) << '/' << cells.size()
                << " cells)\n";
    };

    int jobs = options.jobs > 0 ? options.jobs
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    if (static_cast<std::size_t>(jobs) > n_todo) jobs = static_cast<int>(n_todo);

    if (jobs <= 1) {
        for (std::size_t i = 0; i < n_todo; ++i) {
            CellOutput out = runner.run(cells[prefix + i]);
            commit(i, out);
        }
    } else {
        std::vector<std::optional<CellOutput>> done(n_todo);
        std::mutex mu;
        std::condition_variable cv;
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n_todo) return;
                CellOutput out = runner.run(cells[prefix + i]);
                {
                    std::lock_guard lock(mu);
                    done[i] = std::move(out);
                }
                cv.notify_all();
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) pool.emplace_back(work);
        for (std::size_t i = 0; i < n_todo; ++i) {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return done[i].has_value(); });
            CellOutput out = std::move(*done[i]);
            done[i].reset();
            lock.unlock();
            commit(i, out);
        }
        for (auto& t : pool) t.join();
    }

    log << "sweep complete: " << cells.size() * config.methods.size() << " rows ("
        << summary.failed_rows << " failed) -> " << summary.results_path << '\n';
    return summary;
}

}  // namespace biq
