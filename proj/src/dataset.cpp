#include "biq/dataset.hpp"

#include "biq/rng.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace biq {

namespace {

const char* kMissingTokens[] = {"", "?", "NA", "NaN", "nan"};

bool is_missing(const std::string& s) {
    for (const char* t : kMissingTokens)
        if (s == t) return true;
    return false;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && errno != ERANGE;
}

bool parse_int(const std::string& s, long& out) {
    double d;
    if (!parse_double(s, d)) return false;
    if (d != std::floor(d) || std::abs(d) > 1e15) return false;
    out = static_cast<long>(d);
    return true;
}

// {0,1} and {-1,+1} keep their conventional coding (and dense integer codes
// 0..K-1 stay put, so the canonical CSV form round-trips); anything else is
// factorized in first-appearance order.
std::vector<int> factorize_labels(const std::vector<std::string>& raw, int& n_classes) {
    std::vector<long> as_int(raw.size());
    bool all_int = true;
    for (std::size_t i = 0; i < raw.size() && all_int; ++i)
        all_int = parse_int(raw[i], as_int[i]);

    if (all_int) {
        long lo = *std::min_element(as_int.begin(), as_int.end());
        long hi = *std::max_element(as_int.begin(), as_int.end());
        std::vector<long> distinct(as_int);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        long k = static_cast<long>(distinct.size());
        if (lo == -1 && hi == 1 && k == 2) {
            std::vector<int> out(raw.size());
            for (std::size_t i = 0; i < raw.size(); ++i) out[i] = as_int[i] > 0 ? 1 : 0;
            n_classes = 2;
            return out;
        }
        if (lo == 0 && hi == k - 1) {
            std::vector<int> out(raw.size());
            for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<int>(as_int[i]);
            n_classes = static_cast<int>(k);
            return out;
        }
    }

    std::unordered_map<std::string, int> codes;
    std::vector<int> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto [it, inserted] = codes.emplace(raw[i], static_cast<int>(codes.size()));
        out[i] = it->second;
    }
    n_classes = static_cast<int>(codes.size());
    return out;
}

}  // namespace

std::vector<Index> Dataset::class_counts() const {
    std::vector<Index> counts(static_cast<std::size_t>(n_classes), 0);
    for (Index i = 0; i < labels.size(); ++i) ++counts[static_cast<std::size_t>(labels[i])];
    return counts;
}

Dataset Dataset::subset(const std::vector<Index>& idx) const {
    Dataset out;
    out.n_classes = n_classes;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Index>(idx.size()), features.cols());
    out.labels.resize(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.features.row(static_cast<Index>(i)) = features.row(idx[i]);
        out.labels[static_cast<Index>(i)] = labels[idx[i]];
    }
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.n_samples() == 0) return b;
    if (b.n_samples() == 0) return a;
    if (a.n_features() != b.n_features())
        throw ConfigError("concat: feature dimensions differ");
    Dataset out;
    out.n_classes = std::max(a.n_classes, b.n_classes);
    out.feature_names = a.feature_names;
    out.features.resize(a.n_samples() + b.n_samples(), a.n_features());
    out.features.topRows(a.n_samples()) = a.features;
    out.features.bottomRows(b.n_samples()) = b.features;
    out.labels.resize(a.n_samples() + b.n_samples());
    out.labels.head(a.n_samples()) = a.labels;
    out.labels.tail(b.n_samples()) = b.labels;
    return out;
}

Dataset parse_libsvm(std::istream& in) {
    std::vector<std::string> raw_labels;
    std::vector<std::vector<std::pair<long, double>>> rows;
    long max_index = 0;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;

        std::istringstream ls(t);
        std::string label;
        ls >> label;
        raw_labels.push_back(label);

        std::vector<std::pair<long, double>> entries;
        std::string tok;
        long prev_index = 0;
        while (ls >> tok) {
            std::size_t colon = tok.find(':');
            if (colon == std::string::npos)
                throw ParseError(lineno, "expected <index>:<value>, got '" + tok + "'");
            long idx;
            double val;
            if (!parse_int(tok.substr(0, colon), idx) || idx < 1)
                throw ParseError(lineno, "bad feature index in '" + tok + "'");
            if (!parse_double(tok.substr(colon + 1), val))
                throw ParseError(lineno, "non-numeric value in '" + tok + "'");
            if (idx == prev_index)
                throw ParseError(lineno, "duplicate feature index " + std::to_string(idx));
            if (idx < prev_index)
                throw ParseError(lineno, "feature indices must be strictly increasing");
            prev_index = idx;
            max_index = std::max(max_index, idx);
            entries.emplace_back(idx, val);
        }
        rows.push_back(std::move(entries));
    }

    if (rows.empty()) throw ParseError(lineno, "empty dataset");

    Dataset out;
    long n_features = std::max(max_index, 1l);
    out.features = Matrix::Zero(static_cast<Index>(rows.size()), n_features);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (const auto& [idx, val] : rows[i])
            out.features(static_cast<Index>(i), idx - 1) = val;

    std::vector<int> labels = factorize_labels(raw_labels, out.n_classes);
    out.labels.resize(static_cast<Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) out.labels[static_cast<Index>(i)] = labels[i];
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace

Dataset parse_csv(std::istream& in, const CsvOptions& opts) {
    std::string line;
    std::size_t lineno = 0;

    std::vector<std::string> header;
    if (opts.has_header) {
        if (!std::getline(in, line)) throw ParseError(1, "empty dataset");
        ++lineno;
        header = split_line(line, opts.delimiter);
    }

    std::vector<std::vector<std::string>> cells;
    std::size_t width = opts.has_header ? header.size() : 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto row = split_line(line, opts.delimiter);
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw ParseError(lineno, "ragged row: expected " + std::to_string(width) +
                                         " fields, got " + std::to_string(row.size()));
        cells.push_back(std::move(row));
    }
    if (cells.empty()) throw ParseError(lineno, "empty dataset");

    int label_col = -1;
    if (std::holds_alternative<std::string>(opts.label_column)) {
        const std::string& name = std::get<std::string>(opts.label_column);
        if (!opts.has_header)
            throw ConfigError("label column given by name but the CSV has no header");
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) label_col = static_cast<int>(j);
        if (label_col < 0) throw ConfigError("label column '" + name + "' not found");
    } else {
        label_col = std::get<int>(opts.label_column);
        if (label_col < 0) label_col = static_cast<int>(width) + label_col;
        if (label_col < 0 || label_col >= static_cast<int>(width))
            throw ConfigError("label column index out of range");
    }

    const std::size_t n = cells.size();
    std::vector<std::string> raw_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        raw_labels[i] = cells[i][static_cast<std::size_t>(label_col)];
        if (is_missing(raw_labels[i])) throw ParseError(i + (opts.has_header ? 2 : 1), "missing label");
    }

    // Column typing: numeric when every non-missing cell parses as a number.
    struct Column {
        bool numeric = true;
        std::vector<double> values;          // numeric path, NaN for missing
        std::vector<std::string> categories; // categorical path, appearance order
        std::vector<int> codes;
    };
    std::vector<Column> cols;
    std::vector<std::size_t> col_src;
    for (std::size_t j = 0; j < width; ++j) {
        if (static_cast<int>(j) == label_col) continue;
        Column col;
        col.values.resize(n);
        for (std::size_t i = 0; i < n && col.numeric; ++i) {
            const std::string& cell = cells[i][j];
            if (is_missing(cell)) {
                col.values[i] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            double v;
            if (parse_double(cell, v))
                col.values[i] = v;
            else
                col.numeric = false;
        }
        if (col.numeric) {
            double sum = 0;
            std::size_t cnt = 0;
            for (double v : col.values)
                if (!std::isnan(v)) sum += v, ++cnt;
            double mean = cnt ? sum / static_cast<double>(cnt) : 0.0;
            for (double& v : col.values)
                if (std::isnan(v)) v = mean;
        } else {
            std::unordered_map<std::string, int> codes;
            col.codes.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::string cat = is_missing(cells[i][j]) ? "missing" : cells[i][j];
                auto [it, ins] = codes.emplace(cat, static_cast<int>(codes.size()));
                col.codes[i] = it->second;
                if (ins) col.categories.push_back(cat);
            }
        }
        cols.push_back(std::move(col));
        col_src.push_back(j);
    }

    Index n_out = 0;
    for (const auto& c : cols)
        n_out += c.numeric ? 1 : static_cast<Index>(c.categories.size());

    Dataset out;
    out.features = Matrix::Zero(static_cast<Index>(n), std::max<Index>(n_out, 1));
    Index f = 0;
    for (std::size_t ci = 0; ci < cols.size(); ++ci) {
        const Column& col = cols[ci];
        std::string base = opts.has_header ? header[col_src[ci]]
                                           : "c" + std::to_string(col_src[ci]);
        if (col.numeric) {
            for (std::size_t i = 0; i < n; ++i)
                out.features(static_cast<Index>(i), f) = col.values[i];
            out.feature_names.push_back(base);
            ++f;
        } else {
            for (std::size_t k = 0; k < col.categories.size(); ++k)
                out.feature_names.push_back(base + "=" + col.categories[k]);
            for (std::size_t i = 0; i < n; ++i)
                out.features(static_cast<Index>(i), f + col.codes[i]) = 1.0;
            f += static_cast<Index>(col.categories.size());
        }
    }
    if (n_out == 0) out.feature_names.push_back("c0");

    std::vector<int> labels = factorize_labels(raw_labels, out.n_classes);
    if (out.n_classes < 2) throw Error("degenerate labels: a single class in the label column");
    out.labels.resize(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) out.labels[static_cast<Index>(i)] = labels[i];
    return out;
}

void write_csv(const Dataset& data, std::ostream& out) {
    for (Index j = 0; j < data.n_features(); ++j) {
        if (j < static_cast<Index>(data.feature_names.size()) &&
            !data.feature_names[static_cast<std::size_t>(j)].empty())
            out << data.feature_names[static_cast<std::size_t>(j)];
        else
            out << "f" << j;
        out << ',';
    }
    out << "label\n";
    out << std::setprecision(17);
    for (Index i = 0; i < data.n_samples(); ++i) {
        for (Index j = 0; j < data.n_features(); ++j) out << data.features(i, j) << ',';
        out << data.labels[i] << '\n';
    }
}

Dataset load_dataset(const std::string& path, const std::string& format, const CsvOptions& csv) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file: " + path);
    if (format == "libsvm") return parse_libsvm(in);
    if (format == "csv") return parse_csv(in, csv);
    throw ConfigError("unknown dataset format: " + format);
}

Matrix Scaler::apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        if (scale[j] > 0)
            out.col(j) = (x.col(j).array() - mean[j]) / scale[j];
        else
            out.col(j).setZero();
    }
    return out;
}

Standardized standardize(const Dataset& train, const std::vector<Dataset>& others) {
    if (train.n_samples() == 0) throw ConfigError("standardize: empty training set");
    const Index n = train.n_samples();
    Scaler scaler;
    scaler.mean = train.features.colwise().mean();
    Matrix centered = train.features.rowwise() - scaler.mean.transpose();
    Vector var = centered.array().square().colwise().sum() / static_cast<Scalar>(n);
    scaler.scale = var.array().sqrt();

    Standardized out;
    out.scaler = scaler;
    out.train = train;
    out.train.features = scaler.apply(train.features);
    for (const Dataset& d : others) {
        Dataset s = d;
        s.features = scaler.apply(d.features);
        out.others.push_back(std::move(s));
    }
    return out;
}

SplitResult stratified_split(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("stratified_split: fraction must be in (0,1)");

    std::vector<std::vector<Index>> per_class(static_cast<std::size_t>(data.n_classes));
    for (Index i = 0; i < data.n_samples(); ++i)
        per_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

    Rng rng(seed);
    std::vector<Index> first_idx, second_idx;
    for (auto& members : per_class) {
        if (members.empty()) continue;
        auto n_c = static_cast<double>(members.size());
        auto take = static_cast<std::size_t>(std::lround(fraction * n_c));
        take = std::max<std::size_t>(take, 1);
        take = std::min(take, members.size());
        rng.shuffle(members);
        first_idx.insert(first_idx.end(), members.begin(), members.begin() + static_cast<long>(take));
        second_idx.insert(second_idx.end(), members.begin() + static_cast<long>(take), members.end());
    }
    std::sort(first_idx.begin(), first_idx.end());
    std::sort(second_idx.begin(), second_idx.end());

    SplitResult out;
    out.first = data.subset(first_idx);
    out.second = data.subset(second_idx);
    out.first_idx = std::move(first_idx);
    out.second_idx = std::move(second_idx);
    return out;
}

BiqualitySplit make_biquality(const Dataset& train, Dataset test, double p, std::uint64_t seed) {
    if (!(p > 0.0 && p <= 1.0))
        throw ConfigError("make_biquality: p must be in (0,1]; p = 0 leaves no trusted data");

    BiqualitySplit out;
    out.p = p;
    out.seed = seed;
    out.test = std::move(test);
    if (p == 1.0) {
        out.trusted = train;
        out.untrusted = train.subset({});
        out.trusted_idx.resize(static_cast<std::size_t>(train.n_samples()));
        std::iota(out.trusted_idx.begin(), out.trusted_idx.end(), Index{0});
        return out;
    }
    SplitResult split = stratified_split(train, p, seed);
    out.trusted = std::move(split.first);
    out.untrusted = std::move(split.second);
    out.trusted_idx = std::move(split.first_idx);
    out.untrusted_idx = std::move(split.second_idx);
    return out;
}

}  // namespace biq
