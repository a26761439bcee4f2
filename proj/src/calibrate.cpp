#include "biq/calibrate.hpp"

#include "biq/rng.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace biq {

namespace {

SgdConfig with_seed(SgdConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    return cfg;
}

TransitionSpec subset_transition(const TransitionSpec& spec, const std::vector<Index>& idx) {
    TransitionSpec out;
    out.C = spec.C;
    out.apply.reserve(idx.size());
    for (Index i : idx) out.apply.push_back(spec.apply[static_cast<std::size_t>(i)]);
    return out;
}

Vector gather(const Vector& v, const std::vector<Index>& idx) {
    Vector out(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
    return out;
}

}  // namespace

CalibratedModel fit_calibrated(const Dataset& data, const Vector& weights,
                               const SgdConfig& config, LossKind loss,
                               const TransitionSpec* transition) {
    const Index n = data.n_samples();
    const int k = data.n_classes;
    if (weights.size() != n) throw ConfigError("fit_calibrated: weights not aligned with data");

    CalibratedModel out;

    std::vector<Index> counts = data.class_counts();
    Index min_count = *std::min_element(counts.begin(), counts.end());

    // Out-of-fold (score, one-vs-rest target, weight) pairs per class.
    std::vector<std::vector<double>> cal_scores(static_cast<std::size_t>(k));
    std::vector<std::vector<double>> cal_targets(static_cast<std::size_t>(k));
    std::vector<std::vector<double>> cal_weights(static_cast<std::size_t>(k));

    auto collect = [&](const LinearModel& m, const std::vector<Index>& idx) {
        for (Index i : idx) {
            if (weights[i] <= 0) continue;
            Vector z = score(m, data.features.row(i).transpose());
            for (int c = 0; c < k; ++c) {
                cal_scores[static_cast<std::size_t>(c)].push_back(z[c]);
                cal_targets[static_cast<std::size_t>(c)].push_back(data.labels[i] == c ? 1.0 : 0.0);
                cal_weights[static_cast<std::size_t>(c)].push_back(weights[i]);
            }
        }
    };

    if (min_count < 3) {
        out.warnings.push_back("class with fewer than 3 samples: calibrating on in-sample scores");
        out.base = sgd_fit(data, weights, with_seed(config, derive_seed(config.seed, "cal.final")),
                           loss, transition);
        std::vector<Index> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), Index{0});
        collect(out.base, all);
    } else {
        constexpr int kFolds = 3;
        std::vector<std::vector<Index>> per_class(static_cast<std::size_t>(k));
        for (Index i = 0; i < n; ++i)
            per_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
        Rng rng(derive_seed(config.seed, "cal.folds"));
        std::vector<std::vector<Index>> folds(kFolds);
        for (auto& members : per_class) {
            rng.shuffle(members);
            for (std::size_t i = 0; i < members.size(); ++i)
                folds[i % kFolds].push_back(members[i]);
        }

        for (int f = 0; f < kFolds; ++f) {
            std::vector<Index> train_idx;
            for (int g = 0; g < kFolds; ++g)
                if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
            std::sort(train_idx.begin(), train_idx.end());

            TransitionSpec sub;
            const TransitionSpec* sub_ptr = nullptr;
            if (transition != nullptr) {
                sub = subset_transition(*transition, train_idx);
                sub_ptr = &sub;
            }
            LinearModel fold_model =
                sgd_fit(data.subset(train_idx), gather(weights, train_idx),
                        with_seed(config, derive_seed(config.seed, "cal.fold" + std::to_string(f))),
                        loss, sub_ptr);
            collect(fold_model, folds[f]);
        }
        out.base = sgd_fit(data, weights, with_seed(config, derive_seed(config.seed, "cal.final")),
                           loss, transition);
    }

    for (int c = 0; c < k; ++c) {
        auto m = static_cast<Index>(cal_scores[static_cast<std::size_t>(c)].size());
        Vector s(m), t(m), w(m);
        for (Index i = 0; i < m; ++i) {
            s[i] = cal_scores[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
            t[i] = cal_targets[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
            w[i] = cal_weights[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
        }
        out.calibrators.push_back(isotonic_fit(s, t, w));
    }
    return out;
}

Vector predict_proba(const CalibratedModel& model, const Eigen::Ref<const Vector>& x) {
    Vector z = score(model.base, x);
    const Index k = z.size();
    Vector p(k);
    for (Index c = 0; c < k; ++c) p[c] = model.calibrators[static_cast<std::size_t>(c)].predict(z[c]);
    if (k == 2) {
        double p1 = p[1] / (p[0] + p[1]);
        p[1] = p1;
        p[0] = 1.0 - p1;  // exact binary complement
        return p;
    }
    p /= p.sum();
    for (Index c = 0; c < k; ++c) p[c] = std::clamp(p[c], kProbClip, 1.0 - kProbClip);
    p /= p.sum();
    return p;
}

Matrix predict_proba_all(const CalibratedModel& model, const Matrix& x) {
    Matrix out(x.rows(), model.base.n_classes());
    for (Index i = 0; i < x.rows(); ++i)
        out.row(i) = predict_proba(model, x.row(i).transpose()).transpose();
    return out;
}

int predict(const CalibratedModel& model, const Eigen::Ref<const Vector>& x) {
    Vector p = predict_proba(model, x);
    int best = 0;
    for (Index c = 1; c < p.size(); ++c)
        if (p[c] > p[best]) best = static_cast<int>(c);
    return best;
}

IntVector predict_all(const CalibratedModel& model, const Matrix& x) {
    IntVector out(x.rows());
    for (Index i = 0; i < x.rows(); ++i) out[i] = predict(model, x.row(i).transpose());
    return out;
}

void save_model(const CalibratedModel& model, std::ostream& out) {
    out << "biq-model 1\n";
    out << "loss " << (model.base.loss == LossKind::unhinged ? "unhinged" : "logistic") << '\n';
    out << "classes " << model.base.n_classes() << " features " << model.base.n_features() << '\n';
    out << std::setprecision(17);
    out << "weights\n";
    for (Index r = 0; r < model.base.n_classes(); ++r) {
        for (Index c = 0; c < model.base.n_features(); ++c)
            out << model.base.weights(r, c) << (c + 1 < model.base.n_features() ? " " : "");
        out << '\n';
    }
    out << "bias\n";
    for (Index r = 0; r < model.base.n_classes(); ++r)
        out << model.base.bias[r] << (r + 1 < model.base.n_classes() ? " " : "");
    out << '\n';
    out << "calibrators " << model.calibrators.size() << '\n';
    for (const auto& cal : model.calibrators) {
        out << cal.thresholds.size() << '\n';
        for (Index i = 0; i < cal.thresholds.size(); ++i)
            out << cal.thresholds[i] << ' ' << cal.values[i] << '\n';
    }
}

CalibratedModel load_model(std::istream& in) {
    auto fail = [](const std::string& what) { return ParseError(0, "model file: " + what); };
    std::string tag;
    int version;
    if (!(in >> tag >> version) || tag != "biq-model" || version != 1)
        throw fail("bad magic header");
    std::string key, loss_name;
    if (!(in >> key >> loss_name) || key != "loss") throw fail("missing loss");
    CalibratedModel model;
    model.base.loss = loss_name == "unhinged" ? LossKind::unhinged : LossKind::logistic;
    Index k, d;
    std::string kf, ff;
    if (!(in >> kf >> k >> ff >> d) || kf != "classes" || ff != "features")
        throw fail("missing dimensions");
    if (!(in >> key) || key != "weights") throw fail("missing weights");
    model.base.weights.resize(k, d);
    for (Index r = 0; r < k; ++r)
        for (Index c = 0; c < d; ++c)
            if (!(in >> model.base.weights(r, c))) throw fail("truncated weights");
    if (!(in >> key) || key != "bias") throw fail("missing bias");
    model.base.bias.resize(k);
    for (Index r = 0; r < k; ++r)
        if (!(in >> model.base.bias[r])) throw fail("truncated bias");
    std::size_t n_cal;
    if (!(in >> key >> n_cal) || key != "calibrators") throw fail("missing calibrators");
    for (std::size_t c = 0; c < n_cal; ++c) {
        Index m;
        if (!(in >> m)) throw fail("truncated calibrator");
        IsotonicCalibrator cal;
        cal.thresholds.resize(m);
        cal.values.resize(m);
        for (Index i = 0; i < m; ++i)
            if (!(in >> cal.thresholds[i] >> cal.values[i])) throw fail("truncated calibrator");
        model.calibrators.push_back(std::move(cal));
    }
    return model;
}

void save_model_file(const CalibratedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file: " + path);
    save_model(model, out);
}

CalibratedModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);
    return load_model(in);
}

}  // namespace biq
