#pragma once

#include "biq/calibrate.hpp"
#include "biq/noise.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace biq {

// Importance weights aligned to concat(trusted, untrusted): the first
// n_trusted entries are exactly 1, the rest lie in [eps/(1-eps), (1-eps)/eps]
// because both probability estimates are clipped.
struct BetaWeights {
    Vector values;
    Index n_trusted = 0;
    std::string provenance;
};

// Row i estimates the untrusted label distribution given trusted label i.
// Rows sum to 1; a class without trusted support keeps its identity row.
struct TransitionMatrix {
    Matrix C;
    std::vector<std::string> warnings;
};

struct RiskDecomposition {
    double pooled = 0;
    double trusted_risk = 0;
    double untrusted_risk = 0;
    double trusted_fraction = 0;
};

enum class BaselineKind { trusted, mixed, untrusted };

// Fits calibrated models on each side and sets beta = f_T(x)[y] / f_U(x)[y]
// for untrusted examples. Throws when a class is absent from either side:
// the ratio for that class is undefined.
BetaWeights irbl_weights(const Dataset& trusted, const Dataset& untrusted, const SgdConfig& sgd);

// Final weighted fit on the concatenation. An empty untrusted set reduces to
// the trusted baseline (bit-identical, same seed path).
CalibratedModel irbl_fit(const BiqualitySplit& split, const SgdConfig& sgd,
                         BetaWeights* beta_out = nullptr);

TransitionMatrix glc_estimate(const Dataset& trusted, const CalibratedModel& f_untrusted);

// Plain logistic loss on trusted rows, logistic loss of C^T softmax(z) on
// untrusted rows, then the usual calibration.
CalibratedModel glc_fit(const BiqualitySplit& split, const SgdConfig& sgd,
                        TransitionMatrix* transition_out = nullptr);

// Unhinged-loss model on the concatenation with unit weights. Binary only.
CalibratedModel rll_fit(const BiqualitySplit& split, const SgdConfig& sgd);

BaselineKind parse_baseline_kind(const std::string& name);
CalibratedModel baseline_fit(const BiqualitySplit& split, BaselineKind which, const SgdConfig& sgd);

// Pooled weighted empirical risk over trusted+untrusted together with the
// per-part means; pooled = p * trusted_risk + (1-p) * untrusted_risk up to
// floating error. Weights are aligned to concat(trusted, untrusted).
RiskDecomposition weighted_risk(const LinearModel& model, const Dataset& trusted,
                                const Dataset& untrusted, const Vector& weights);

// Diagnostic dump: index, trusted flag, flipped flag, beta. records describe
// the corruption of the untrusted part and may be empty (nothing flipped).
void write_beta_csv(const BetaWeights& beta, const std::vector<CorruptionRecord>& records,
                    std::ostream& out);

}  // namespace biq
