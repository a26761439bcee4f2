#pragma once

#include "biq/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace biq {

// Dense tabular classification data. Immutable after construction; every
// split, corruption and training operation consumes it by const reference.
struct Dataset {
    Matrix features;                         // n_samples x n_features
    IntVector labels;                        // class indices in [0, n_classes)
    int n_classes = 0;
    std::vector<std::string> feature_names;  // empty or one name per feature

    Index n_samples() const { return features.rows(); }
    Index n_features() const { return features.cols(); }

    std::vector<Index> class_counts() const;
    Dataset subset(const std::vector<Index>& idx) const;
};

Dataset concat(const Dataset& a, const Dataset& b);

// --- parsing ---------------------------------------------------------------

// `<label> <idx>:<val> ...` lines with strictly increasing 1-based indices.
// Labels {-1,+1} and {0,1} map to {0,1}; any other label set is factorized
// in first-appearance order.
Dataset parse_libsvm(std::istream& in);

struct CsvOptions {
    char delimiter = ',';
    bool has_header = true;
    // Column name (requires header) or 0-based column index.
    std::variant<std::string, int> label_column = std::string("label");
};

// Rectangular CSV. Numeric columns are parsed as reals with missing values
// imputed by the column mean; categorical columns are one-hot encoded with
// missing values as an explicit category. The label column is factorized to
// [0, K), except that integer labels already equal to {0..K-1} (or {-1,+1})
// keep their natural coding.
Dataset parse_csv(std::istream& in, const CsvOptions& opts);

// Canonical CSV form: feature columns by name, label column last. Values are
// printed with enough digits to round-trip doubles exactly.
void write_csv(const Dataset& data, std::ostream& out);

Dataset load_dataset(const std::string& path, const std::string& format,
                     const CsvOptions& csv = {});

// --- preprocessing ---------------------------------------------------------

struct Scaler {
    Vector mean;
    Vector scale;  // zero marks a constant feature, mapped to 0
    Matrix apply(const Matrix& x) const;
};

struct Standardized {
    Dataset train;
    std::vector<Dataset> others;
    Scaler scaler;
};

// Affine map fitted on `train` (each feature to mean 0, variance 1; constant
// features to 0) and applied unchanged to `others`.
Standardized standardize(const Dataset& train, const std::vector<Dataset>& others);

// --- splitting -------------------------------------------------------------

struct SplitResult {
    Dataset first;
    Dataset second;
    std::vector<Index> first_idx;   // origin indices into the input
    std::vector<Index> second_idx;
};

// Per class c the first part receives round(fraction * n_c) samples, at least
// one. Deterministic in `seed`; both parts keep ascending origin order.
SplitResult stratified_split(const Dataset& data, double fraction, std::uint64_t seed);

struct BiqualitySplit {
    Dataset trusted;
    Dataset untrusted;
    Dataset test;
    double p = 0.0;
    std::uint64_t seed = 0;
    std::vector<Index> trusted_idx;    // origin indices into the train set
    std::vector<Index> untrusted_idx;
};

// Stratified p-fraction of `train` becomes the trusted part, the rest the
// untrusted part (labels still clean at this stage). p = 1 leaves the
// untrusted part empty; p = 0 is unsupported.
BiqualitySplit make_biquality(const Dataset& train, Dataset test, double p,
                              std::uint64_t seed);

}  // namespace biq
