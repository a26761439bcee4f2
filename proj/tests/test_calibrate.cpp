#include "biq/calibrate.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cstdio>
#include <sstream>

using namespace biq;

namespace {

SgdConfig quick_config() {
    SgdConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.seed = 3;
    return cfg;
}

// Identity scorer on a single feature with handmade single-level calibrators,
// so predicted probabilities are known exactly.
CalibratedModel flat_model(double p0, double p1) {
    CalibratedModel m;
    m.base.weights = Matrix::Zero(2, 1);
    m.base.weights << -1.0, 1.0;
    m.base.bias = Vector::Zero(2);
    IsotonicCalibrator c0;
    c0.thresholds = Vector::Zero(1);
    c0.values = Vector::Constant(1, p0);
    IsotonicCalibrator c1 = c0;
    c1.values = Vector::Constant(1, p1);
    m.calibrators = {c0, c1};
    return m;
}

}  // namespace

TEST_CASE("calibrated blobs give the true class the larger probability") {
    Dataset d = testing::make_blobs(40, 3, 1.5, 9);
    CalibratedModel m = fit_calibrated(d, Vector::Ones(d.n_samples()), quick_config(),
                                       LossKind::logistic);
    Matrix probs = predict_proba_all(m, d.features);
    int hits = 0;
    for (Index i = 0; i < d.n_samples(); ++i)
        if (probs(i, d.labels[i]) >= 0.5) ++hits;
    CHECK(hits >= 76);  // 95% of 80
}

TEST_CASE("probability rows sum to one inside the clipped band") {
    Dataset d = testing::random_dataset(60, 4, 3, 19);
    CalibratedModel m = fit_calibrated(d, Vector::Ones(d.n_samples()), quick_config(),
                                       LossKind::logistic);
    Dataset probe = testing::random_dataset(50, 4, 3, 20);
    Matrix probs = predict_proba_all(m, probe.features);
    // Renormalization after clipping may move entries a few ulps past the
    // clip bounds, so the band check carries that allowance.
    const double slack = 16.0 * kProbClip * kProbClip;
    for (Index i = 0; i < probs.rows(); ++i) {
        CHECK(std::abs(probs.row(i).sum() - 1.0) < 1e-9);
        for (Index k = 0; k < probs.cols(); ++k) {
            CHECK(probs(i, k) >= kProbClip - slack);
            CHECK(probs(i, k) <= 1.0 - kProbClip + slack);
        }
    }
}

TEST_CASE("binary renormalization keeps the exact complement") {
    CalibratedModel m = flat_model(0.3, 0.7);
    Vector x = Vector::Constant(1, 0.4);
    Vector p = predict_proba(m, x);
    CHECK(p[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(p[0] + p[1] == 1.0);
}

TEST_CASE("predict takes the argmax and breaks ties toward class 0") {
    CalibratedModel m = flat_model(0.5, 0.5);
    Vector x = Vector::Constant(1, 0.0);
    CHECK(predict(m, x) == 0);

    CalibratedModel up = flat_model(0.2, 0.8);
    CHECK(predict(up, x) == 1);

    Matrix xs = Matrix::Zero(3, 1);
    IntVector all = predict_all(up, xs);
    for (Index i = 0; i < 3; ++i) CHECK(all[i] == 1);
}

TEST_CASE("predict_proba agrees with predict_proba_all row by row") {
    Dataset d = testing::make_blobs(15, 2, 1.0, 29);
    CalibratedModel m = fit_calibrated(d, Vector::Ones(d.n_samples()), quick_config(),
                                       LossKind::logistic);
    Matrix all = predict_proba_all(m, d.features);
    for (Index i = 0; i < d.n_samples(); ++i) {
        Vector one = predict_proba(m, d.features.row(i).transpose());
        CHECK((all.row(i).transpose() - one).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("save and load round-trip models through streams and files") {
    Dataset d = testing::random_dataset(45, 3, 3, 39);
    CalibratedModel m = fit_calibrated(d, Vector::Ones(d.n_samples()), quick_config(),
                                       LossKind::logistic);

    std::stringstream buf;
    save_model(m, buf);
    CalibratedModel back = load_model(buf);
    CHECK((back.base.weights - m.base.weights).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.base.bias - m.base.bias).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(back.calibrators.size() == m.calibrators.size());
    for (std::size_t k = 0; k < m.calibrators.size(); ++k) {
        CHECK((back.calibrators[k].thresholds - m.calibrators[k].thresholds)
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
        CHECK((back.calibrators[k].values - m.calibrators[k].values).cwiseAbs().maxCoeff() <
              1e-12);
    }

    Dataset probe = testing::random_dataset(20, 3, 3, 40);
    std::string path = "test_calibrate_model.txt";
    save_model_file(m, path);
    CalibratedModel from_file = load_model_file(path);
    Matrix a = predict_proba_all(m, probe.features);
    Matrix b = predict_proba_all(from_file, probe.features);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_model_file("no/such/model.txt"), ConfigError);
}

TEST_CASE("a class below the cross-fit minimum is recorded in warnings") {
    Dataset d = testing::make_blobs(30, 2, 1.2, 49);
    Dataset rare = testing::make_blobs(1, 2, 1.2, 50);  // adds 1 sample per class
    rare.labels[0] = 2;
    rare.labels[1] = 2;
    rare.n_classes = 3;
    Dataset merged = d;
    merged.n_classes = 3;
    Dataset joined = concat(merged, rare);
    CalibratedModel m = fit_calibrated(joined, Vector::Ones(joined.n_samples()),
                                       quick_config(), LossKind::logistic);
    CHECK(!m.warnings.empty());
}

TEST_CASE("calibrated fitting is deterministic in the seed") {
    Dataset d = testing::make_blobs(25, 3, 1.0, 59);
    CalibratedModel a = fit_calibrated(d, Vector::Ones(d.n_samples()), quick_config(),
                                       LossKind::logistic);
    CalibratedModel b = fit_calibrated(d, Vector::Ones(d.n_samples()), quick_config(),
                                       LossKind::logistic);
    CHECK(a.base.weights == b.base.weights);
    Dataset probe = testing::make_blobs(10, 3, 1.0, 60);
    CHECK(predict_proba_all(a, probe.features) == predict_proba_all(b, probe.features));
}
