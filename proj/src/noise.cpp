#include "biq/noise.hpp"

#include "biq/rng.hpp"

#include <cmath>
#include <ostream>

namespace biq {

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "ncar") return NoiseKind::ncar;
    if (name == "nnar") return NoiseKind::nnar;
    throw ConfigError("unknown noise kind: " + name);
}

std::string noise_kind_name(NoiseKind kind) {
    return kind == NoiseKind::ncar ? "ncar" : "nnar";
}

namespace {

void check_quality(double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quality must lie in [0, 1]");
}

}  // namespace

CorruptionResult ncar_corrupt(const Dataset& data, double q, std::uint64_t seed) {
    check_quality(q);
    const double rate = 1.0 - q;
    const int k = data.n_classes;
    Rng rng(seed);
    CorruptionResult out;
    out.data = data;
    out.records.reserve(static_cast<std::size_t>(data.n_samples()));
    for (Index i = 0; i < data.n_samples(); ++i) {
        CorruptionRecord rec{i, data.labels[i], data.labels[i], false, false};
        if (rng.bernoulli(rate)) {
            rec.selected = true;
            rec.corrupted_label = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
            rec.flipped = rec.corrupted_label != rec.original_label;
            out.data.labels[i] = rec.corrupted_label;
        }
        out.records.push_back(rec);
    }
    return out;
}

double nnar_rate(double p1, double theta) {
    check_quality(theta);
    if (theta == 0.0) return 1.0;
    return 1.0 - theta * std::pow(std::abs(1.0 - 2.0 * p1), 1.0 / theta);
}

Vector nnar_rates(const CalibratedModel& total_model, const Matrix& features, double theta) {
    if (total_model.base.n_classes() != 2)
        throw UnsupportedError("nnar noise requires a binary problem");
    Matrix proba = predict_proba_all(total_model, features);
    Vector rates(features.rows());
    for (Index i = 0; i < features.rows(); ++i) rates[i] = nnar_rate(proba(i, 1), theta);
    return rates;
}

CorruptionResult nnar_corrupt(const Dataset& data, const CalibratedModel& total_model,
                              double theta, std::uint64_t seed) {
    if (data.n_classes != 2) throw UnsupportedError("nnar noise requires a binary problem");
    Vector rates = nnar_rates(total_model, data.features, theta);
    Rng rng(seed);
    CorruptionResult out;
    out.data = data;
    out.records.reserve(static_cast<std::size_t>(data.n_samples()));
    for (Index i = 0; i < data.n_samples(); ++i) {
        CorruptionRecord rec{i, data.labels[i], data.labels[i], false, false};
        if (rng.bernoulli(rates[i])) {
            rec.selected = true;
            rec.corrupted_label = static_cast<int>(rng.below(2));
            rec.flipped = rec.corrupted_label != rec.original_label;
            out.data.labels[i] = rec.corrupted_label;
        }
        out.records.push_back(rec);
    }
    return out;
}

void write_corruption_csv(const std::vector<CorruptionRecord>& records, std::ostream& out) {
    out << "index,original_label,corrupted_label,selected,flipped\n";
    for (const auto& rec : records)
        out << rec.index << ',' << rec.original_label << ',' << rec.corrupted_label << ','
            << (rec.selected ? 1 : 0) << ',' << (rec.flipped ? 1 : 0) << '\n';
}

}  // namespace biq
