#include "biq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace biq {

namespace {

// Regularized lower incomplete gamma P(a, x) by power series, valid x < a+1.
double gamma_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by continued fraction, x >= a+1.
double gamma_cont_frac(double a, double x) {
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Per-row ranks, 1 = highest score, tied scores share the mean rank.
Vector row_ranks(const Eigen::Ref<const Vector>& scores) {
    const Index k = scores.size();
    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index ia, Index ib) { return scores[ia] > scores[ib]; });
    Vector ranks(k);
    Index pos = 0;
    while (pos < k) {
        Index end = pos;
        while (end + 1 < k && scores[order[end + 1]] == scores[order[pos]]) ++end;
        double mean_rank = static_cast<double>(pos + end) / 2.0 + 1.0;
        for (Index i = pos; i <= end; ++i) ranks[order[i]] = mean_rank;
        pos = end + 1;
    }
    return ranks;
}

Vector average_ranks(const ScoreTable& table) {
    Vector sums = Vector::Zero(table.n_methods());
    for (Index row = 0; row < table.n_datasets(); ++row)
        sums += row_ranks(table.scores.row(row).transpose());
    return sums / static_cast<double>(table.n_datasets());
}

void check_table(const ScoreTable& table) {
    if (table.scores.rows() != static_cast<Index>(table.datasets.size()) ||
        table.scores.cols() != static_cast<Index>(table.methods.size()))
        throw ConfigError("score table: names not aligned with the matrix");
    if (table.n_datasets() < 1) throw ConfigError("score table: no datasets");
}

// Two-tailed critical values q_0.05(k) of the studentized range / sqrt(2)
// for k = 2..10 (Demsar's table).
constexpr double kNemenyiQ[] = {1.960, 2.343, 2.569, 2.728, 2.850,
                                2.949, 3.031, 3.102, 3.164};

}  // namespace

double chi_square_survival(double x, double nu) {
    if (nu <= 0) throw ConfigError("chi-square needs positive degrees of freedom");
    if (x <= 0) return 1.0;
    double a = nu / 2.0;
    double half = x / 2.0;
    if (half < a + 1.0) return 1.0 - gamma_series(a, half);
    return gamma_cont_frac(a, half);
}

double accuracy(const CalibratedModel& model, const Dataset& test) {
    if (test.n_samples() == 0) throw ConfigError("accuracy: empty test set");
    IntVector pred = predict_all(model, test.features);
    Index hits = 0;
    for (Index i = 0; i < test.n_samples(); ++i)
        if (pred[i] == test.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(test.n_samples());
}

TestOutcome friedman(const ScoreTable& table, double alpha) {
    check_table(table);
    const auto k = static_cast<double>(table.n_methods());
    const auto n = static_cast<double>(table.n_datasets());
    if (table.n_methods() < 3)
        throw ConfigError("friedman requires at least 3 methods; use wilcoxon_signed_rank for 2");

    TestOutcome out;
    out.alpha = alpha;
    out.avg_ranks = average_ranks(table);
    if (table.n_datasets() == 1) out.warnings.push_back("single dataset: low statistical power");

    double sum_sq = out.avg_ranks.squaredNorm();
    out.statistic = 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0);
    if (out.statistic < 0) out.statistic = 0;  // full-tie rounding guard
    out.p_value = chi_square_survival(out.statistic, k - 1.0);
    out.reject = out.p_value < alpha;
    return out;
}

TestOutcome nemenyi(const ScoreTable& table, double alpha) {
    check_table(table);
    const Index k = table.n_methods();
    if (k < 2 || k > 10)
        throw ConfigError("nemenyi: no embedded critical value for k = " + std::to_string(k));
    if (alpha != 0.05)
        throw ConfigError("nemenyi: embedded critical values cover alpha = 0.05 only");

    TestOutcome out;
    if (k >= 3) {
        out = friedman(table, alpha);
    } else {
        out.avg_ranks = average_ranks(table);
        out.warnings.push_back("k = 2: no chi-square stage, reporting rank gap against CD only");
    }
    out.alpha = alpha;

    const auto kd = static_cast<double>(k);
    const auto n = static_cast<double>(table.n_datasets());
    out.critical_difference = kNemenyiQ[k - 2] * std::sqrt(kd * (kd + 1.0) / (6.0 * n));

    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int ia, int ib) { return out.avg_ranks[ia] < out.avg_ranks[ib]; });

    // Maximal runs of rank-sorted methods spanning less than one CD.
    Index prev_end = -1;
    for (Index lo = 0; lo < k; ++lo) {
        Index hi = lo;
        while (hi + 1 < k && out.avg_ranks[order[hi + 1]] - out.avg_ranks[order[lo]] <
                                 out.critical_difference)
            ++hi;
        if (hi > prev_end) {
            out.groups.emplace_back(order.begin() + lo, order.begin() + hi + 1);
            prev_end = hi;
        }
    }
    return out;
}

TestOutcome wilcoxon_signed_rank(const Vector& a, const Vector& b, double alpha) {
    if (a.size() != b.size()) throw ConfigError("wilcoxon: series lengths differ");

    std::vector<double> diffs;
    for (Index i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    TestOutcome out;
    out.alpha = alpha;
    out.zeros_dropped = static_cast<int>(a.size()) - static_cast<int>(diffs.size());

    const auto m = static_cast<int>(diffs.size());
    if (m == 0) {
        out.exact = true;
        return out;  // no information: tie, p = 1
    }
    if (m < 5) out.warnings.push_back("fewer than 5 nonzero differences: low power");

    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int ia, int ib) {
        return std::abs(diffs[static_cast<std::size_t>(ia)]) <
               std::abs(diffs[static_cast<std::size_t>(ib)]);
    });

    // Doubled ranks stay integral under tie averaging.
    std::vector<long> ranks2(static_cast<std::size_t>(m));
    std::vector<long> tie_sizes;
    int pos = 0;
    while (pos < m) {
        int end = pos;
        while (end + 1 < m &&
               std::abs(diffs[static_cast<std::size_t>(order[end + 1])]) ==
                   std::abs(diffs[static_cast<std::size_t>(order[pos])]))
            ++end;
        long rank2 = pos + end + 2;  // 2 * mean of ranks pos+1 .. end+1
        for (int i = pos; i <= end; ++i) ranks2[static_cast<std::size_t>(order[i])] = rank2;
        if (end > pos) tie_sizes.push_back(end - pos + 1);
        pos = end + 1;
    }

    long w_plus2 = 0;
    long total2 = 0;
    for (int i = 0; i < m; ++i) {
        total2 += ranks2[static_cast<std::size_t>(i)];
        if (diffs[static_cast<std::size_t>(i)] > 0) w_plus2 += ranks2[static_cast<std::size_t>(i)];
    }
    long w_minus2 = total2 - w_plus2;
    out.statistic = static_cast<double>(std::min(w_plus2, w_minus2)) / 2.0;

    if (m <= 12) {
        out.exact = true;
        long lo = std::min(w_plus2, w_minus2);
        long hi = std::max(w_plus2, w_minus2);
        long count = 0;
        const unsigned long n_masks = 1UL << m;
        for (unsigned long mask = 0; mask < n_masks; ++mask) {
            long w2 = 0;
            for (int i = 0; i < m; ++i)
                if (mask & (1UL << i)) w2 += ranks2[static_cast<std::size_t>(i)];
            if (w2 <= lo || w2 >= hi) ++count;
        }
        out.p_value = static_cast<double>(count) / static_cast<double>(n_masks);
    } else {
        double md = m;
        double mu = md * (md + 1.0) / 4.0;
        double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0;
        for (long t : tie_sizes) {
            double td = static_cast<double>(t);
            var -= (td * td * td - td) / 48.0;
        }
        double w_plus = static_cast<double>(w_plus2) / 2.0;
        if (var <= 0) {
            out.p_value = 1.0;
        } else {
            double num = w_plus - mu;
            double cc = num > 0 ? -0.5 : (num < 0 ? 0.5 : 0.0);
            double z = (num + cc) / std::sqrt(var);
            out.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
        }
    }
    out.p_value = std::min(out.p_value, 1.0);
    out.reject = out.p_value < alpha;
    if (out.reject) out.outcome = w_plus2 > w_minus2 ? PairOutcome::win : PairOutcome::loss;
    return out;
}

void write_score_table(const ScoreTable& table, std::ostream& out) {
    check_table(table);
    out << "dataset";
    for (const auto& m : table.methods) out << ',' << m;
    out << '\n' << std::setprecision(17);
    for (Index row = 0; row < table.n_datasets(); ++row) {
        out << table.datasets[static_cast<std::size_t>(row)];
        for (Index col = 0; col < table.n_methods(); ++col) out << ',' << table.scores(row, col);
        out << '\n';
    }
}

ScoreTable read_score_table(std::istream& in) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(1, "score table: empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split(line);
    if (header.size() < 3) throw ParseError(line_no, "score table: need at least 2 methods");

    ScoreTable table;
    table.methods.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split(line);
        if (cells.size() != header.size())
            throw ParseError(line_no, "score table: expected " + std::to_string(header.size()) +
                                          " cells, found " + std::to_string(cells.size()));
        table.datasets.push_back(cells[0]);
        std::vector<double> values;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (cells[c].empty()) throw ParseError(line_no, "score table: missing cell");
            try {
                values.push_back(std::stod(cells[c]));
            } catch (const std::exception&) {
                throw ParseError(line_no, "score table: bad number '" + cells[c] + "'");
            }
        }
        rows.push_back(std::move(values));
    }
    if (rows.size() < 2) throw ParseError(line_no, "score table: need at least 2 datasets");

    table.scores.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.methods.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            table.scores(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return table;
}

}  // namespace biq
