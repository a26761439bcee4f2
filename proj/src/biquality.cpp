#include "biq/biquality.hpp"

#include "biq/rng.hpp"

#include <iomanip>
#include <ostream>

namespace biq {

namespace {

SgdConfig derived(SgdConfig cfg, std::string_view tag) {
    cfg.seed = derive_seed(cfg.seed, tag);
    return cfg;
}

Vector unit_weights(Index n) { return Vector::Ones(n); }

void require_class_coverage(const Dataset& data, const char* side) {
    std::vector<Index> counts = data.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 0)
            throw TrainError("cannot estimate concept: class " + std::to_string(c) +
                             " missing from " + side + " dataset");
}

}  // namespace

BetaWeights irbl_weights(const Dataset& trusted, const Dataset& untrusted, const SgdConfig& sgd) {
    if (trusted.n_samples() == 0) throw TrainError("irbl: empty trusted set");
    if (untrusted.n_samples() == 0) throw TrainError("irbl: empty untrusted set");
    require_class_coverage(trusted, "trusted");
    require_class_coverage(untrusted, "untrusted");

    CalibratedModel f_u = fit_calibrated(untrusted, unit_weights(untrusted.n_samples()),
                                         derived(sgd, "irbl.fu"), LossKind::logistic);
    CalibratedModel f_t = fit_calibrated(trusted, unit_weights(trusted.n_samples()),
                                         derived(sgd, "irbl.ft"), LossKind::logistic);

    BetaWeights beta;
    beta.n_trusted = trusted.n_samples();
    beta.provenance = "irbl";
    beta.values.resize(trusted.n_samples() + untrusted.n_samples());
    beta.values.head(trusted.n_samples()).setOnes();
    for (Index i = 0; i < untrusted.n_samples(); ++i) {
        Vector x = untrusted.features.row(i).transpose();
        int y = untrusted.labels[i];
        beta.values[trusted.n_samples() + i] = predict_proba(f_t, x)[y] / predict_proba(f_u, x)[y];
    }
    return beta;
}

CalibratedModel irbl_fit(const BiqualitySplit& split, const SgdConfig& sgd,
                         BetaWeights* beta_out) {
    if (split.untrusted.n_samples() == 0) {
        if (beta_out != nullptr) {
            beta_out->values = unit_weights(split.trusted.n_samples());
            beta_out->n_trusted = split.trusted.n_samples();
            beta_out->provenance = "irbl";
        }
        return baseline_fit(split, BaselineKind::trusted, sgd);
    }
    BetaWeights beta = irbl_weights(split.trusted, split.untrusted, sgd);
    Dataset pooled = concat(split.trusted, split.untrusted);
    CalibratedModel model =
        fit_calibrated(pooled, beta.values, derived(sgd, "irbl.final"), LossKind::logistic);
    if (beta_out != nullptr) *beta_out = std::move(beta);
    return model;
}

TransitionMatrix glc_estimate(const Dataset& trusted, const CalibratedModel& f_untrusted) {
    if (trusted.n_samples() == 0) throw TrainError("glc: empty trusted set");
    const int k = f_untrusted.base.n_classes();
    Matrix proba = predict_proba_all(f_untrusted, trusted.features);

    TransitionMatrix out;
    out.C = Matrix::Identity(k, k);
    for (int c = 0; c < k; ++c) {
        Vector mean = Vector::Zero(k);
        Index count = 0;
        for (Index i = 0; i < trusted.n_samples(); ++i) {
            if (trusted.labels[i] != c) continue;
            mean += proba.row(i).transpose();
            ++count;
        }
        if (count == 0) {
            out.warnings.push_back("no trusted support for class " + std::to_string(c) +
                                   ": keeping identity row");
            continue;
        }
        out.C.row(c) = (mean / static_cast<double>(count)).transpose();
    }
    return out;
}

CalibratedModel glc_fit(const BiqualitySplit& split, const SgdConfig& sgd,
                        TransitionMatrix* transition_out) {
    if (split.untrusted.n_samples() == 0) {
        if (transition_out != nullptr) {
            transition_out->C = Matrix::Identity(split.trusted.n_classes, split.trusted.n_classes);
            transition_out->warnings.clear();
        }
        return baseline_fit(split, BaselineKind::trusted, sgd);
    }
    CalibratedModel f_u =
        fit_calibrated(split.untrusted, unit_weights(split.untrusted.n_samples()),
                       derived(sgd, "glc.fu"), LossKind::logistic);
    TransitionMatrix transition = glc_estimate(split.trusted, f_u);

    Dataset pooled = concat(split.trusted, split.untrusted);
    TransitionSpec spec;
    spec.C = transition.C;
    spec.apply.assign(static_cast<std::size_t>(pooled.n_samples()), 0);
    for (Index i = split.trusted.n_samples(); i < pooled.n_samples(); ++i)
        spec.apply[static_cast<std::size_t>(i)] = 1;

    CalibratedModel model = fit_calibrated(pooled, unit_weights(pooled.n_samples()),
                                           derived(sgd, "glc.final"), LossKind::logistic, &spec);
    if (transition_out != nullptr) *transition_out = std::move(transition);
    return model;
}

CalibratedModel rll_fit(const BiqualitySplit& split, const SgdConfig& sgd) {
    if (split.trusted.n_classes != 2)
        throw UnsupportedError("rll requires a binary problem");
    Dataset pooled = split.untrusted.n_samples() == 0
                         ? split.trusted
                         : concat(split.trusted, split.untrusted);
    return fit_calibrated(pooled, unit_weights(pooled.n_samples()), derived(sgd, "rll.fit"),
                          LossKind::unhinged);
}

BaselineKind parse_baseline_kind(const std::string& name) {
    if (name == "trusted") return BaselineKind::trusted;
    if (name == "mixed") return BaselineKind::mixed;
    if (name == "untrusted") return BaselineKind::untrusted;
    throw ConfigError("unknown baseline: " + name);
}

CalibratedModel baseline_fit(const BiqualitySplit& split, BaselineKind which,
                             const SgdConfig& sgd) {
    switch (which) {
        case BaselineKind::trusted:
            if (split.trusted.n_samples() == 0) throw TrainError("baseline: empty trusted set");
            return fit_calibrated(split.trusted, unit_weights(split.trusted.n_samples()),
                                  derived(sgd, "baseline.trusted"), LossKind::logistic);
        case BaselineKind::mixed: {
            if (split.trusted.n_samples() + split.untrusted.n_samples() == 0)
                throw TrainError("baseline: empty training data");
            Dataset pooled = split.untrusted.n_samples() == 0
                                 ? split.trusted
                                 : concat(split.trusted, split.untrusted);
            return fit_calibrated(pooled, unit_weights(pooled.n_samples()),
                                  derived(sgd, "baseline.mixed"), LossKind::logistic);
        }
        case BaselineKind::untrusted:
            if (split.untrusted.n_samples() == 0) throw TrainError("baseline: empty untrusted set");
            return fit_calibrated(split.untrusted, unit_weights(split.untrusted.n_samples()),
                                  derived(sgd, "baseline.untrusted"), LossKind::logistic);
    }
    throw ConfigError("unknown baseline");
}

RiskDecomposition weighted_risk(const LinearModel& model, const Dataset& trusted,
                                const Dataset& untrusted, const Vector& weights) {
    const Index nt = trusted.n_samples();
    const Index nu = untrusted.n_samples();
    if (weights.size() != nt + nu)
        throw ConfigError("weighted_risk: weights not aligned with trusted+untrusted");

    double sum_t = 0;
    for (Index i = 0; i < nt; ++i)
        sum_t += weights[i] * example_loss(model, trusted.features.row(i).transpose(),
                                           trusted.labels[i]);
    double sum_u = 0;
    for (Index i = 0; i < nu; ++i)
        sum_u += weights[nt + i] * example_loss(model, untrusted.features.row(i).transpose(),
                                                untrusted.labels[i]);

    RiskDecomposition out;
    out.trusted_fraction = static_cast<double>(nt) / static_cast<double>(nt + nu);
    out.trusted_risk = nt > 0 ? sum_t / static_cast<double>(nt) : 0.0;
    out.untrusted_risk = nu > 0 ? sum_u / static_cast<double>(nu) : 0.0;
    out.pooled = (sum_t + sum_u) / static_cast<double>(nt + nu);
    return out;
}

void write_beta_csv(const BetaWeights& beta, const std::vector<CorruptionRecord>& records,
                    std::ostream& out) {
    out << "index,trusted,flipped,beta\n" << std::setprecision(17);
    for (Index i = 0; i < beta.values.size(); ++i) {
        bool is_trusted = i < beta.n_trusted;
        bool flipped = false;
        if (!is_trusted) {
            auto u = static_cast<std::size_t>(i - beta.n_trusted);
            if (u < records.size()) flipped = records[u].flipped;
        }
        out << i << ',' << (is_trusted ? 1 : 0) << ',' << (flipped ? 1 : 0) << ','
            << beta.values[i] << '\n';
    }
}

}  // namespace biq
