#include "biq/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace biq {

namespace {

int find_or_add(std::vector<std::string>& v, const std::string& s) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] == s) return static_cast<int>(i);
    v.push_back(s);
    return static_cast<int>(v.size()) - 1;
}

int index_of(const std::vector<double>& grid, double value) {
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] == value) return static_cast<int>(i);
    return -1;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    out.count = static_cast<int>(values.size());
    if (values.empty()) return out;
    double sum = 0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

double quantile(const std::vector<double>& sorted, double frac) {
    if (sorted.empty()) return 0;
    double h = frac * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double w = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - w) + sorted[lo + 1] * w;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Seed means per (noise, p, q, method, dataset); -1 count means no data.
struct SeedMeans {
    std::vector<std::string> datasets, methods;
    std::vector<NoiseKind> noises;
    std::vector<double> p_grid, q_grid;
    std::vector<double> sum;
    std::vector<int> count;

    std::size_t flat(int n, int pi, int qi, int mi, int di) const {
        return ((((static_cast<std::size_t>(n) * p_grid.size() + pi) * q_grid.size() + qi) *
                     methods.size() +
                 mi) *
                    datasets.size() +
                di);
    }
    bool has(int n, int pi, int qi, int mi, int di) const {
        return count[flat(n, pi, qi, mi, di)] > 0;
    }
    double mean(int n, int pi, int qi, int mi, int di) const {
        std::size_t f = flat(n, pi, qi, mi, di);
        return sum[f] / static_cast<double>(count[f]);
    }
};

SeedMeans collect_seed_means(const std::vector<ResultRecord>& records, Aggregates& agg) {
    SeedMeans sm;
    std::vector<std::string> noise_names;
    std::vector<double> ps, qs;
    for (const auto& r : records) {
        find_or_add(sm.datasets, r.dataset);
        find_or_add(sm.methods, r.method);
        find_or_add(noise_names, r.noise);
        if (index_of(ps, r.p) < 0) ps.push_back(r.p);
        if (index_of(qs, r.q) < 0) qs.push_back(r.q);
    }
    std::sort(ps.begin(), ps.end());
    std::sort(qs.begin(), qs.end());
    sm.p_grid = ps;
    sm.q_grid = qs;
    for (const auto& n : noise_names) sm.noises.push_back(parse_noise_kind(n));

    sm.sum.assign(sm.noises.size() * ps.size() * qs.size() * sm.methods.size() *
                      sm.datasets.size(),
                  0.0);
    sm.count.assign(sm.sum.size(), 0);
    std::size_t skipped = 0;
    for (const auto& r : records) {
        if (!r.ok) {
            ++skipped;
            continue;
        }
        int n = 0;
        for (std::size_t i = 0; i < noise_names.size(); ++i)
            if (noise_names[i] == r.noise) n = static_cast<int>(i);
        int di = find_or_add(sm.datasets, r.dataset);
        int mi = find_or_add(sm.methods, r.method);
        std::size_t f = sm.flat(n, index_of(ps, r.p), index_of(qs, r.q), mi, di);
        sm.sum[f] += r.accuracy;
        sm.count[f] += 1;
    }
    if (skipped > 0)
        agg.warnings.push_back(std::to_string(skipped) +
                               " failed rows excluded from aggregation");
    return sm;
}

}  // namespace

Aggregates aggregate(const std::vector<ResultRecord>& records) {
    if (records.empty()) throw ConfigError("aggregate: no records");
    Aggregates agg;
    SeedMeans sm = collect_seed_means(records, agg);
    agg.datasets = sm.datasets;
    agg.methods = sm.methods;
    agg.noises = sm.noises;
    agg.p_grid = sm.p_grid;
    agg.q_grid = sm.q_grid;

    const int nd = static_cast<int>(sm.datasets.size());
    const int nm = static_cast<int>(sm.methods.size());
    const int np = static_cast<int>(sm.p_grid.size());
    const int nq = static_cast<int>(sm.q_grid.size());

    // Per-dataset value across the q grid = mean of per-q seed means.
    auto dataset_value = [&](int n, int pi, int mi, int di) -> std::optional<double> {
        double sum = 0;
        int used = 0;
        for (int qi = 0; qi < nq; ++qi) {
            if (!sm.has(n, pi, qi, mi, di)) continue;
            sum += sm.mean(n, pi, qi, mi, di);
            ++used;
        }
        if (used == 0) return std::nullopt;
        return sum / used;
    };

    for (std::size_t n = 0; n < sm.noises.size(); ++n) {
        for (int pi = 0; pi < np; ++pi) {
            for (int mi = 0; mi < nm; ++mi) {
                std::vector<double> values;
                int dropped = 0;
                for (int di = 0; di < nd; ++di) {
                    auto v = dataset_value(static_cast<int>(n), pi, mi, di);
                    if (v)
                        values.push_back(*v * 100.0);
                    else
                        ++dropped;
                }
                if (values.empty()) continue;
                if (dropped > 0)
                    agg.warnings.push_back("table " + noise_kind_name(sm.noises[n]) + " p=" +
                                           format_double(sm.p_grid[pi]) + " " + sm.methods[mi] +
                                           ": " + std::to_string(dropped) +
                                           " dataset(s) dropped");
                agg.table2.push_back({sm.noises[n], sm.p_grid[pi], sm.methods[mi],
                                      mean_std(values)});
            }
            for (int qi = 0; qi < nq; ++qi) {
                for (int mi = 0; mi < nm; ++mi) {
                    std::vector<double> errors;
                    for (int di = 0; di < nd; ++di)
                        if (sm.has(static_cast<int>(n), pi, qi, mi, di))
                            errors.push_back((1.0 - sm.mean(static_cast<int>(n), pi, qi, mi, di)) *
                                             100.0);
                    if (errors.empty()) continue;
                    agg.curves.push_back({sm.noises[n], sm.p_grid[pi], sm.q_grid[qi],
                                          sm.methods[mi], mean_std(errors)});
                }
                for (int ma = 0; ma < nm; ++ma) {
                    for (int mb = ma + 1; mb < nm; ++mb) {
                        std::vector<double> va, vb;
                        for (int di = 0; di < nd; ++di) {
                            if (!sm.has(static_cast<int>(n), pi, qi, ma, di) ||
                                !sm.has(static_cast<int>(n), pi, qi, mb, di))
                                continue;
                            va.push_back(sm.mean(static_cast<int>(n), pi, qi, ma, di));
                            vb.push_back(sm.mean(static_cast<int>(n), pi, qi, mb, di));
                        }
                        if (va.empty()) continue;
                        WtlEntry entry{sm.noises[n], sm.p_grid[pi], sm.q_grid[qi],
                                       sm.methods[ma], sm.methods[mb],
                                       wilcoxon_signed_rank(
                                           Eigen::Map<const Vector>(va.data(),
                                                                    static_cast<Index>(va.size())),
                                           Eigen::Map<const Vector>(vb.data(),
                                                                    static_cast<Index>(vb.size())))};
                        agg.wilcoxon.push_back(std::move(entry));
                    }
                }
            }
        }

        // Ranking tables: datasets as rows, then dataset x p x q cells.
        ScoreTable by_dataset;
        by_dataset.methods = sm.methods;
        for (int di = 0; di < nd; ++di) {
            std::vector<double> row;
            bool complete = true;
            for (int mi = 0; mi < nm && complete; ++mi) {
                double sum = 0;
                int used = 0;
                for (int pi = 0; pi < np; ++pi) {
                    auto v = dataset_value(static_cast<int>(n), pi, mi, di);
                    if (v) {
                        sum += *v;
                        ++used;
                    }
                }
                if (used == 0)
                    complete = false;
                else
                    row.push_back(sum / used);
            }
            if (!complete) {
                agg.warnings.push_back("ranking " + noise_kind_name(sm.noises[n]) + ": dataset " +
                                       sm.datasets[di] + " dropped (incomplete methods)");
                continue;
            }
            by_dataset.datasets.push_back(sm.datasets[di]);
            Index r = by_dataset.scores.rows();
            by_dataset.scores.conservativeResize(r + 1, nm);
            for (int mi = 0; mi < nm; ++mi) by_dataset.scores(r, mi) = row[mi];
        }
        agg.scores_datasets.emplace_back(sm.noises[n], std::move(by_dataset));

        ScoreTable by_cell;
        by_cell.methods = sm.methods;
        for (int di = 0; di < nd; ++di) {
            for (int pi = 0; pi < np; ++pi) {
                for (int qi = 0; qi < nq; ++qi) {
                    bool complete = true;
                    std::vector<double> row;
                    for (int mi = 0; mi < nm && complete; ++mi) {
                        if (!sm.has(static_cast<int>(n), pi, qi, mi, di))
                            complete = false;
                        else
                            row.push_back(sm.mean(static_cast<int>(n), pi, qi, mi, di));
                    }
                    if (!complete) continue;
                    by_cell.datasets.push_back(sm.datasets[di] + "|p=" +
                                               format_double(sm.p_grid[pi]) + "|q=" +
                                               format_double(sm.q_grid[qi]));
                    Index r = by_cell.scores.rows();
                    by_cell.scores.conservativeResize(r + 1, nm);
                    for (int mi = 0; mi < nm; ++mi) by_cell.scores(r, mi) = row[mi];
                }
            }
        }
        agg.scores_cells.emplace_back(sm.noises[n], std::move(by_cell));
    }
    return agg;
}

// ---------------------------------------------------------------------------
// SVG rendering

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

class Svg {
  public:
    Svg(double width, double height) : width_(width), height_(height) {}

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double w = 1.0) {
        body_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
              << "\" stroke=\"" << stroke << "\" stroke-width=\"" << w << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill,
              double opacity = 1.0) {
        body_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
              << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\"/>\n";
    }
    void circle(double cx, double cy, double r, const std::string& fill,
                const std::string& stroke = "none") {
        body_ << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r << "\" fill=\"" << fill
              << "\" stroke=\"" << stroke << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& anchor = "start",
              double size = 12, const std::string& fill = "#222") {
        body_ << "<text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"" << anchor
              << "\" font-size=\"" << size << "\" font-family=\"sans-serif\" fill=\"" << fill
              << "\">" << xml_escape(s) << "</text>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  double w = 1.5) {
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << w
              << "\" points=\"";
        for (const auto& [x, y] : pts) body_ << x << ',' << y << ' ';
        body_ << "\"/>\n";
    }

    std::string str() const {
        std::ostringstream out;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
            << height_ << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n"
            << "<rect width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"white\"/>\n"
            << body_.str() << "</svg>\n";
        return out.str();
    }

  private:
    double width_, height_;
    std::ostringstream body_;
};

void write_file(const fs::path& path, const std::string& content, std::ostream& log) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
    log << "wrote " << path.string() << '\n';
}

struct BetaRow {
    bool trusted = false;
    bool flipped = false;
    double beta = 1.0;
};

std::vector<BetaRow> read_beta_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open beta dump: " + path.string());
    std::vector<BetaRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        BetaRow row;
        long idx;
        int trusted, flipped;
        double beta;
        if (std::sscanf(line.c_str(), "%ld,%d,%d,%lf", &idx, &trusted, &flipped, &beta) != 4)
            continue;
        row.trusted = trusted != 0;
        row.flipped = flipped != 0;
        row.beta = beta;
        rows.push_back(row);
    }
    return rows;
}

// Untrusted-row beta values for one (noise, p, q) slice, every dataset and
// seed pooled, split by the flipped flag.
struct BetaSlice {
    std::vector<double> clean, flipped;
    int files = 0;
};

BetaSlice collect_beta(const fs::path& beta_dir, const Aggregates& agg, NoiseKind noise, double p,
                       double q) {
    BetaSlice slice;
    if (!fs::is_directory(beta_dir)) return slice;
    std::string mid = "_" + noise_kind_name(noise) + "_p" + format_double(p) + "_q" +
                      format_double(q) + "_s";
    for (const auto& entry : fs::directory_iterator(beta_dir)) {
        std::string name = entry.path().filename().string();
        if (name.find(mid) == std::string::npos) continue;
        bool known = false;
        for (const auto& ds : agg.datasets) known = known || name.rfind(ds + "_", 0) == 0;
        if (!known) continue;
        for (const auto& row : read_beta_file(entry.path())) {
            if (row.trusted) continue;
            (row.flipped ? slice.flipped : slice.clean).push_back(row.beta);
        }
        ++slice.files;
    }
    return slice;
}

std::string render_error_curves(const Aggregates& agg, NoiseKind noise, double p) {
    const double w = 640, h = 420, ml = 60, mr = 150, mt = 40, mb = 50;
    Svg svg(w, h);
    double max_err = 0;
    for (const auto& c : agg.curves)
        if (c.noise == noise && c.p == p) max_err = std::max(max_err, c.error_pct.mean);
    if (max_err <= 0) max_err = 1;
    max_err *= 1.1;

    auto sx = [&](double q) { return ml + q * (w - ml - mr); };
    auto sy = [&](double e) { return h - mb - e / max_err * (h - mt - mb); };

    svg.line(ml, h - mb, w - mr, h - mb, "#444");
    svg.line(ml, mt, ml, h - mb, "#444");
    for (double q : agg.q_grid) {
        svg.line(sx(q), h - mb, sx(q), h - mb + 4, "#444");
        svg.text(sx(q), h - mb + 18, format_double(q), "middle", 11);
    }
    for (int i = 0; i <= 4; ++i) {
        double e = max_err * i / 4.0;
        svg.line(ml - 4, sy(e), ml, sy(e), "#444");
        svg.text(ml - 8, sy(e) + 4, fixed(e, 1), "end", 11);
    }
    svg.text((ml + w - mr) / 2, h - 12, "q (label quality)", "middle", 12);
    svg.text(16, mt - 14, "test error (%)", "start", 12);
    svg.text((ml + w - mr) / 2, 20,
             "error vs quality, " + noise_kind_name(noise) + ", p=" + format_double(p), "middle",
             13);

    for (std::size_t mi = 0; mi < agg.methods.size(); ++mi) {
        std::vector<std::pair<double, double>> pts;
        for (double q : agg.q_grid)
            for (const auto& c : agg.curves)
                if (c.noise == noise && c.p == p && c.q == q && c.method == agg.methods[mi])
                    pts.emplace_back(sx(q), sy(c.error_pct.mean));
        if (pts.empty()) continue;
        const std::string color = kPalette[mi % 6];
        svg.polyline(pts, color);
        for (const auto& [x, y] : pts) svg.circle(x, y, 3, color);
        svg.text(w - mr + 12, mt + 16 + 18 * static_cast<double>(mi), agg.methods[mi], "start", 12,
                 color);
    }
    return svg.str();
}

std::string render_cd_diagram(const ScoreTable& table, const TestOutcome& outcome,
                              const std::string& title) {
    const auto k = static_cast<int>(table.methods.size());
    const double w = 640, ml = 70, mr = 70;
    const double axis_y = 70;
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return outcome.avg_ranks[a] < outcome.avg_ranks[b]; });

    const double label_rows = std::ceil(k / 2.0);
    const double h = axis_y + 30 + label_rows * 20 + 40 + 20 * static_cast<double>(outcome.groups.size());
    Svg svg(w, h);
    auto sx = [&](double rank) { return ml + (rank - 1.0) / (k - 1.0) * (w - ml - mr); };

    svg.text(w / 2, 22, title, "middle", 13);
    svg.line(ml, axis_y, w - mr, axis_y, "#222", 1.5);
    for (int r = 1; r <= k; ++r) {
        svg.line(sx(r), axis_y - 5, sx(r), axis_y + 5, "#222");
        svg.text(sx(r), axis_y - 10, std::to_string(r), "middle", 11);
    }
    // CD ruler anchored at rank 1.
    svg.line(sx(1), 38, sx(1 + outcome.critical_difference), 38, "#d62728", 2);
    svg.text(sx(1 + outcome.critical_difference) + 6, 42,
             "CD=" + fixed(outcome.critical_difference, 3), "start", 11, "#d62728");

    // Method stems: best half labeled on the left, rest on the right.
    for (int i = 0; i < k; ++i) {
        int m = order[static_cast<std::size_t>(i)];
        double rank = outcome.avg_ranks[m];
        bool left = i < (k + 1) / 2;
        double row = left ? i : (k - 1 - i);
        double y = axis_y + 30 + row * 20;
        double label_x = left ? ml - 8 : w - mr + 8;
        svg.line(sx(rank), axis_y, sx(rank), y, "#666");
        svg.line(sx(rank), y, left ? ml : w - mr, y, "#666");
        svg.text(label_x, y + 4,
                 table.methods[static_cast<std::size_t>(m)] + " (" + fixed(rank, 2) + ")",
                 left ? "end" : "start", 11);
    }
    // Group bars under the labels.
    double gy = axis_y + 30 + label_rows * 20 + 16;
    for (const auto& group : outcome.groups) {
        if (group.size() < 2) continue;
        double lo = outcome.avg_ranks[group.front()];
        double hi = outcome.avg_ranks[group.back()];
        svg.line(sx(lo) - 3, gy, sx(hi) + 3, gy, "#222", 4);
        gy += 20;
    }
    return svg.str();
}

std::string render_wtl_grid(const Aggregates& agg, NoiseKind noise, const std::string& ref,
                            const std::string& opponent) {
    const double cell = 44, ml = 70, mt = 60;
    const auto np = static_cast<double>(agg.p_grid.size());
    const auto nq = static_cast<double>(agg.q_grid.size());
    const double w = ml + nq * cell + 30, h = mt + np * cell + 30;
    Svg svg(w, h);
    svg.text(w / 2, 22, ref + " vs " + opponent + " (" + noise_kind_name(noise) + ")", "middle",
             13);
    svg.text(w / 2, 40, "win ○   tie ·   loss ●", "middle", 11, "#555");

    for (std::size_t qi = 0; qi < agg.q_grid.size(); ++qi)
        svg.text(ml + (qi + 0.5) * cell, mt - 8, "q=" + format_double(agg.q_grid[qi]), "middle",
                 10);
    // Vertical axis is p, largest on top.
    for (std::size_t pi = 0; pi < agg.p_grid.size(); ++pi) {
        double p = agg.p_grid[agg.p_grid.size() - 1 - pi];
        double cy = mt + (pi + 0.5) * cell;
        svg.text(ml - 8, cy + 4, "p=" + format_double(p), "end", 10);
        for (std::size_t qi = 0; qi < agg.q_grid.size(); ++qi) {
            double q = agg.q_grid[qi];
            double cx = ml + (qi + 0.5) * cell;
            svg.rect(ml + qi * cell, mt + pi * cell, cell, cell, "none");
            svg.line(ml + qi * cell, mt + pi * cell, ml + (qi + 1) * cell, mt + pi * cell, "#ccc");
            svg.line(ml + qi * cell, mt + pi * cell, ml + qi * cell, mt + (pi + 1) * cell, "#ccc");
            const WtlEntry* found = nullptr;
            bool mirrored = false;
            for (const auto& e : agg.wilcoxon) {
                if (e.noise != noise || e.p != p || e.q != q) continue;
                if (e.method_a == ref && e.method_b == opponent) {
                    found = &e;
                    mirrored = false;
                } else if (e.method_a == opponent && e.method_b == ref) {
                    found = &e;
                    mirrored = true;
                }
            }
            if (found == nullptr) continue;
            PairOutcome o = found->test.outcome;
            if (mirrored && o != PairOutcome::tie)
                o = o == PairOutcome::win ? PairOutcome::loss : PairOutcome::win;
            if (o == PairOutcome::win)
                svg.circle(cx, cy, 10, "none", "#222");
            else if (o == PairOutcome::loss)
                svg.circle(cx, cy, 10, "#222");
            else
                svg.circle(cx, cy, 2.5, "#222");
        }
    }
    svg.line(ml, mt + np * cell, ml + nq * cell, mt + np * cell, "#ccc");
    svg.line(ml + nq * cell, mt, ml + nq * cell, mt + np * cell, "#ccc");
    return svg.str();
}

std::string render_beta_hist(const BetaSlice& slice, NoiseKind noise, double p,
                             std::string* csv_out) {
    const int bins = 40;
    const double lo = -2.0, hi = 2.0;
    std::vector<int> clean_counts(bins, 0), flipped_counts(bins, 0);
    auto bin_of = [&](double beta) {
        double x = std::log10(std::max(beta, 1e-300));
        int b = static_cast<int>((x - lo) / (hi - lo) * bins);
        return std::clamp(b, 0, bins - 1);
    };
    for (double b : slice.clean) ++clean_counts[static_cast<std::size_t>(bin_of(b))];
    for (double b : slice.flipped) ++flipped_counts[static_cast<std::size_t>(bin_of(b))];

    std::ostringstream csv;
    csv << "beta_lo,beta_hi,clean,flipped\n";
    for (int b = 0; b < bins; ++b) {
        double e0 = std::pow(10.0, lo + (hi - lo) * b / bins);
        double e1 = std::pow(10.0, lo + (hi - lo) * (b + 1) / bins);
        csv << format_double(e0) << ',' << format_double(e1) << ',' << clean_counts[b] << ','
            << flipped_counts[b] << '\n';
    }
    *csv_out = csv.str();

    const double w = 640, h = 400, ml = 60, mr = 30, mt = 50, mb = 50;
    Svg svg(w, h);
    double clean_n = std::max<std::size_t>(slice.clean.size(), 1);
    double flipped_n = std::max<std::size_t>(slice.flipped.size(), 1);
    double max_frac = 1e-9;
    for (int b = 0; b < bins; ++b) {
        max_frac = std::max(max_frac, clean_counts[b] / clean_n);
        max_frac = std::max(max_frac, flipped_counts[b] / flipped_n);
    }
    auto sx = [&](double bi) { return ml + bi / bins * (w - ml - mr); };
    auto sy = [&](double frac) { return h - mb - frac / max_frac * (h - mt - mb); };
    for (int b = 0; b < bins; ++b) {
        double x = sx(b), bw = sx(b + 1) - x;
        double cf = clean_counts[b] / clean_n;
        double ff = flipped_counts[b] / flipped_n;
        if (cf > 0) svg.rect(x, sy(cf), bw, h - mb - sy(cf), "#1f77b4", 0.55);
        if (ff > 0) svg.rect(x, sy(ff), bw, h - mb - sy(ff), "#d62728", 0.55);
    }
    svg.line(ml, h - mb, w - mr, h - mb, "#444");
    for (double tick : {0.01, 0.1, 1.0, 10.0, 100.0}) {
        double bi = (std::log10(tick) - lo) / (hi - lo) * bins;
        svg.line(sx(bi), h - mb, sx(bi), h - mb + 4, "#444");
        svg.text(sx(bi), h - mb + 18, format_double(tick), "middle", 11);
    }
    svg.text((ml + w - mr) / 2, h - 12, "beta (log scale)", "middle", 12);
    svg.text((ml + w - mr) / 2, 22,
             "beta by corruption state, " + noise_kind_name(noise) + ", p=" + format_double(p) +
                 ", q=0",
             "middle", 13);
    svg.text(w - mr - 10, mt, "clean (n=" + std::to_string(slice.clean.size()) + ")", "end", 11,
             "#1f77b4");
    svg.text(w - mr - 10, mt + 16, "flipped (n=" + std::to_string(slice.flipped.size()) + ")",
             "end", 11, "#d62728");
    return svg.str();
}

struct BoxStats {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
    std::size_t n = 0;
};

BoxStats box_stats(std::vector<double> values) {
    BoxStats out;
    out.n = values.size();
    if (values.empty()) return out;
    std::sort(values.begin(), values.end());
    out.min = values.front();
    out.max = values.back();
    out.q1 = quantile(values, 0.25);
    out.median = quantile(values, 0.5);
    out.q3 = quantile(values, 0.75);
    return out;
}

std::string render_beta_box(const std::vector<std::pair<double, BetaSlice>>& by_q, NoiseKind noise,
                            double p, std::string* csv_out) {
    std::ostringstream csv;
    csv << "q,group,count,min,q1,median,q3,max\n";
    std::vector<std::tuple<double, std::string, BoxStats>> boxes;
    for (const auto& [q, slice] : by_q) {
        BoxStats clean = box_stats(slice.clean);
        BoxStats flipped = box_stats(slice.flipped);
        for (const auto& [name, st] : {std::pair<std::string, BoxStats>{"clean", clean},
                                       std::pair<std::string, BoxStats>{"flipped", flipped}}) {
            csv << format_double(q) << ',' << name << ',' << st.n << ',' << format_double(st.min)
                << ',' << format_double(st.q1) << ',' << format_double(st.median) << ','
                << format_double(st.q3) << ',' << format_double(st.max) << '\n';
            if (st.n > 0) boxes.emplace_back(q, name, st);
        }
    }
    *csv_out = csv.str();

    const double w = 640, h = 420, ml = 60, mr = 30, mt = 50, mb = 50;
    Svg svg(w, h);
    // Clamp the vertical range by the quartile spread, beta tails are huge.
    double ymax = 1e-9;
    for (const auto& [q, name, st] : boxes) ymax = std::max(ymax, st.q3 * 1.6);
    ymax = std::min(ymax, 5.0);
    auto sy = [&](double v) {
        return h - mb - std::clamp(v, 0.0, ymax) / ymax * (h - mt - mb);
    };
    auto sx = [&](double q, bool flipped) {
        return ml + (q + (flipped ? 0.05 : -0.05) + 0.08) * (w - ml - mr) / 1.2;
    };
    svg.line(ml, h - mb, w - mr, h - mb, "#444");
    svg.line(ml, mt, ml, h - mb, "#444");
    for (int i = 0; i <= 5; ++i) {
        double v = ymax * i / 5.0;
        svg.line(ml - 4, sy(v), ml, sy(v), "#444");
        svg.text(ml - 8, sy(v) + 4, fixed(v, 2), "end", 10);
    }
    for (const auto& [q, name, st] : boxes) {
        bool flipped = name == "flipped";
        double x = sx(q, flipped);
        const std::string color = flipped ? "#d62728" : "#1f77b4";
        const double bw2 = 9;
        svg.line(x, sy(st.min), x, sy(st.q1), color);
        svg.line(x, sy(st.q3), x, sy(st.max), color);
        svg.rect(x - bw2, sy(st.q3), 2 * bw2, std::max(1.0, sy(st.q1) - sy(st.q3)), color, 0.25);
        svg.line(x - bw2, sy(st.median), x + bw2, sy(st.median), color, 2);
        if (!flipped) svg.text(x + 4, h - mb + 18, "q=" + format_double(q), "middle", 10);
    }
    svg.text((ml + w - mr) / 2, h - 12, "q (label quality)", "middle", 12);
    svg.text(16, mt - 14, "beta (clamped at " + fixed(ymax, 1) + ")", "start", 11);
    svg.text((ml + w - mr) / 2, 22,
             "beta vs quality, " + noise_kind_name(noise) + ", p=" + format_double(p), "middle",
             13);
    svg.text(w - mr - 10, mt, "clean", "end", 11, "#1f77b4");
    svg.text(w - mr - 10, mt + 16, "flipped", "end", 11, "#d62728");
    return svg.str();
}

}  // namespace

void write_report(const Aggregates& agg, const std::string& beta_dir, const std::string& out_dir,
                  std::ostream& log) {
    if (agg.methods.empty()) throw ConfigError("nothing to report: no methods in the records");
    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    for (auto noise : agg.noises) {
        const std::string nn = noise_kind_name(noise);

        {
            std::ostringstream csv;
            csv << "p";
            for (const auto& m : agg.methods) csv << ',' << m << "_mean," << m << "_std";
            csv << '\n';
            for (double p : agg.p_grid) {
                csv << format_double(p);
                for (const auto& m : agg.methods) {
                    const Table2Entry* found = nullptr;
                    for (const auto& e : agg.table2)
                        if (e.noise == noise && e.p == p && e.method == m) found = &e;
                    if (found != nullptr)
                        csv << ',' << fixed(found->accuracy_pct.mean, 2) << ','
                            << fixed(found->accuracy_pct.stddev, 2);
                    else
                        csv << ",,";
                }
                csv << '\n';
            }
            write_file(out / ("table2_" + nn + ".csv"), csv.str(), log);
        }

        {
            std::ostringstream csv;
            csv << "p,q,method,error_mean,error_std,n_datasets\n";
            for (const auto& c : agg.curves)
                if (c.noise == noise)
                    csv << format_double(c.p) << ',' << format_double(c.q) << ',' << c.method
                        << ',' << fixed(c.error_pct.mean, 4) << ',' << fixed(c.error_pct.stddev, 4)
                        << ',' << c.error_pct.count << '\n';
            write_file(out / ("error_vs_q_" + nn + ".csv"), csv.str(), log);
        }

        {
            std::ostringstream csv;
            csv << "p,q,method_a,method_b,statistic,p_value,outcome,zeros_dropped,exact\n";
            for (const auto& e : agg.wilcoxon) {
                if (e.noise != noise) continue;
                const char* o = e.test.outcome == PairOutcome::win
                                    ? "win"
                                    : e.test.outcome == PairOutcome::loss ? "loss" : "tie";
                csv << format_double(e.p) << ',' << format_double(e.q) << ',' << e.method_a << ','
                    << e.method_b << ',' << format_double(e.test.statistic) << ','
                    << format_double(e.test.p_value) << ',' << o << ',' << e.test.zeros_dropped
                    << ',' << (e.test.exact ? 1 : 0) << '\n';
            }
            write_file(out / ("wilcoxon_" + nn + ".csv"), csv.str(), log);
        }

        for (double p : agg.p_grid)
            write_file(out / ("error_vs_q_" + nn + "_p" + format_double(p) + ".svg"),
                       render_error_curves(agg, noise, p), log);

        for (const auto& [tables, tag] :
             {std::pair{&agg.scores_datasets, "datasets"}, std::pair{&agg.scores_cells, "cells"}}) {
            for (const auto& [tnoise, table] : *tables) {
                if (tnoise != noise) continue;
                if (table.scores.rows() < 2 || table.scores.cols() < 2) {
                    log << "skipping " << nn << ' ' << tag << " ranking: too few rows\n";
                    continue;
                }
                {
                    std::ostringstream csv;
                    write_score_table(table, csv);
                    write_file(out / ("scores_" + nn + "_" + tag + ".csv"), csv.str(), log);
                }
                TestOutcome outcome = nemenyi(table);
                std::ostringstream csv;
                csv << "method,avg_rank,critical_difference,friedman_statistic,friedman_p,n_rows\n";
                for (Index m = 0; m < table.n_methods(); ++m)
                    csv << table.methods[static_cast<std::size_t>(m)] << ','
                        << format_double(outcome.avg_ranks[m]) << ','
                        << format_double(outcome.critical_difference) << ','
                        << format_double(outcome.statistic) << ','
                        << format_double(outcome.p_value) << ',' << table.n_datasets() << '\n';
                write_file(out / ("ranks_" + nn + "_" + tag + ".csv"), csv.str(), log);
                write_file(out / ("cd_" + nn + "_" + tag + ".svg"),
                           render_cd_diagram(table, outcome,
                                             "average ranks (" + nn + ", " + tag + ")"),
                           log);
            }
        }

        std::string ref = agg.methods[0];
        for (const auto& m : agg.methods)
            if (m == "irbl") ref = m;
        for (const auto& m : agg.methods)
            if (m != ref)
                write_file(out / ("wtl_" + nn + "_" + ref + "_vs_" + m + ".svg"),
                           render_wtl_grid(agg, noise, ref, m), log);

        if (!beta_dir.empty() && fs::is_directory(beta_dir) && !agg.p_grid.empty()) {
            double p_show = agg.p_grid.back();
            BetaSlice hist_slice = collect_beta(beta_dir, agg, noise, p_show, 0.0);
            if (hist_slice.files > 0) {
                std::string csv;
                std::string svg = render_beta_hist(hist_slice, noise, p_show, &csv);
                write_file(out / ("beta_hist_" + nn + ".csv"), csv, log);
                write_file(out / ("beta_hist_" + nn + ".svg"), svg, log);
            }
            std::vector<std::pair<double, BetaSlice>> by_q;
            for (double q : agg.q_grid) {
                BetaSlice s = collect_beta(beta_dir, agg, noise, p_show, q);
                if (s.files > 0) by_q.emplace_back(q, std::move(s));
            }
            if (!by_q.empty()) {
                std::string csv;
                std::string svg = render_beta_box(by_q, noise, p_show, &csv);
                write_file(out / ("beta_box_" + nn + ".csv"), csv, log);
                write_file(out / ("beta_box_" + nn + ".svg"), svg, log);
            }
        } else {
            log << "no beta dumps for " << nn << ": skipping beta figures\n";
        }
    }

    for (const auto& w : agg.warnings) log << "warning: " << w << '\n';
}

void inspect_beta(const std::string& results_path, const std::string& dataset, double p, double q,
                  std::ostream& out) {
    const fs::path beta_dir = fs::path(results_path).parent_path() / "beta";
    if (!fs::is_directory(beta_dir))
        throw ConfigError("no beta directory next to " + results_path);

    bool any = false;
    out << "beta for " << dataset << ", p=" << format_double(p) << ", q=" << format_double(q)
        << '\n';
    for (NoiseKind noise : {NoiseKind::ncar, NoiseKind::nnar}) {
        std::string prefix = dataset + "_" + noise_kind_name(noise) + "_p" + format_double(p) +
                             "_q" + format_double(q) + "_s";
        std::vector<double> clean, flipped;
        std::size_t trusted_rows = 0;
        int files = 0;
        for (const auto& entry : fs::directory_iterator(beta_dir)) {
            if (entry.path().filename().string().rfind(prefix, 0) != 0) continue;
            ++files;
            for (const auto& row : read_beta_file(entry.path())) {
                if (row.trusted) {
                    ++trusted_rows;
                    continue;
                }
                (row.flipped ? flipped : clean).push_back(row.beta);
            }
        }
        if (files == 0) continue;
        any = true;
        out << "  " << noise_kind_name(noise) << ": " << files << " seed file(s), "
            << trusted_rows << " trusted rows, " << clean.size() + flipped.size()
            << " untrusted rows\n";
        for (auto& [name, values] :
             {std::pair<const char*, std::vector<double>&>{"clean", clean},
              std::pair<const char*, std::vector<double>&>{"flipped", flipped}}) {
            if (values.empty()) {
                out << "    " << name << ": none\n";
                continue;
            }
            std::sort(values.begin(), values.end());
            double mean = 0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            out << "    " << name << ": n=" << values.size() << " median="
                << fixed(quantile(values, 0.5), 4) << " mean=" << fixed(mean, 4) << " q1="
                << fixed(quantile(values, 0.25), 4) << " q3=" << fixed(quantile(values, 0.75), 4)
                << '\n';
        }
    }
    if (!any)
        throw ConfigError("no beta dumps match " + dataset + " p=" + format_double(p) + " q=" +
                          format_double(q));
}

}  // namespace biq
