#include "biq/noise.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace biq;

namespace {

double flip_fraction(const CorruptionResult& r) {
    double flips = 0;
    for (const auto& rec : r.records) flips += rec.flipped ? 1 : 0;
    return flips / static_cast<double>(r.records.size());
}

double selected_fraction(const CorruptionResult& r) {
    double sel = 0;
    for (const auto& rec : r.records) sel += rec.selected ? 1 : 0;
    return sel / static_cast<double>(r.records.size());
}

CalibratedModel blob_model(int seed) {
    Dataset train = testing::make_blobs(400, 2, 1.0, seed);
    SgdConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 25;
    cfg.batch_size = 32;
    cfg.seed = 5;
    return fit_calibrated(train, Vector::Ones(train.n_samples()), cfg, LossKind::logistic);
}

}  // namespace

TEST_CASE("noise kinds parse and print") {
    CHECK(parse_noise_kind("ncar") == NoiseKind::ncar);
    CHECK(parse_noise_kind("nnar") == NoiseKind::nnar);
    CHECK(noise_kind_name(NoiseKind::ncar) == "ncar");
    CHECK(noise_kind_name(NoiseKind::nnar) == "nnar");
    CHECK_THROWS_AS(parse_noise_kind("gaussian"), ConfigError);
}

TEST_CASE("ncar at q=1 selects nothing and preserves labels") {
    Dataset d = testing::random_dataset(500, 3, 2, 7);
    CorruptionResult r = ncar_corrupt(d, 1.0, 42);
    CHECK(selected_fraction(r) == 0.0);
    CHECK(r.data.labels == d.labels);
    CHECK(r.data.features == d.features);
}

TEST_CASE("ncar flip rates track r (K-1)/K") {
    Dataset d = testing::random_dataset(100000, 2, 2, 8);
    CHECK(std::abs(flip_fraction(ncar_corrupt(d, 0.0, 1)) - 0.5) < 0.01);
    CHECK(std::abs(flip_fraction(ncar_corrupt(d, 0.5, 2)) - 0.25) < 0.01);

    Dataset four = testing::random_dataset(100000, 2, 4, 9);
    CHECK(std::abs(flip_fraction(ncar_corrupt(four, 0.0, 3)) - 0.75) < 0.01);
}

TEST_CASE("corruption records are coherent with the relabeled data") {
    Dataset d = testing::random_dataset(4000, 2, 3, 10);
    CorruptionResult r = ncar_corrupt(d, 0.4, 11);
    CHECK(r.data.features == d.features);
    for (const auto& rec : r.records) {
        CHECK(rec.original_label == d.labels[rec.index]);
        CHECK(rec.corrupted_label == r.data.labels[rec.index]);
        if (rec.flipped) CHECK(rec.selected);
        if (!rec.selected) {
            CHECK(!rec.flipped);
            CHECK(rec.corrupted_label == rec.original_label);
        }
        if (rec.selected && rec.corrupted_label == rec.original_label) CHECK(!rec.flipped);
    }
}

TEST_CASE("ncar flip fraction falls as quality rises") {
    Dataset d = testing::random_dataset(20000, 2, 2, 12);
    double prev = 1.0;
    int step = 0;
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        double frac = flip_fraction(ncar_corrupt(d, q, 100 + step++));
        CHECK(frac <= prev + 0.01);
        prev = frac;
    }
}

TEST_CASE("ncar is deterministic in the seed") {
    Dataset d = testing::random_dataset(300, 2, 2, 13);
    CorruptionResult a = ncar_corrupt(d, 0.5, 77);
    CorruptionResult b = ncar_corrupt(d, 0.5, 77);
    CHECK(a.data.labels == b.data.labels);
    CorruptionResult c = ncar_corrupt(d, 0.5, 78);
    CHECK(a.data.labels != c.data.labels);

    CHECK_THROWS_AS(ncar_corrupt(d, -0.1, 1), ConfigError);
    CHECK_THROWS_AS(ncar_corrupt(d, 1.1, 1), ConfigError);
}

TEST_CASE("nnar_rate hits its pinned values") {
    CHECK(nnar_rate(0.5, 0.25) == 1.0);
    CHECK(nnar_rate(0.5, 1.0) == 1.0);
    CHECK(nnar_rate(1.0, 1.0) == doctest::Approx(0.0));
    CHECK(nnar_rate(0.75, 0.5) == doctest::Approx(0.875));
    CHECK(nnar_rate(0.1, 0.0) == 1.0);
    CHECK(nnar_rate(0.9, 0.0) == 1.0);
    CHECK_THROWS_AS(nnar_rate(0.5, 1.5), ConfigError);

    // Decreasing in distance from the boundary, decreasing in theta.
    for (double theta : {0.25, 0.5, 0.75, 1.0}) {
        double prev = 2.0;
        for (double p1 : {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}) {
            double r = nnar_rate(p1, theta);
            CHECK(r <= prev);
            CHECK(r >= 0.0);
            prev = r;
        }
    }
    for (double p1 : {0.6, 0.8, 0.95}) {
        double prev = 2.0;
        for (double theta : {0.1, 0.4, 0.7, 1.0}) {
            double r = nnar_rate(p1, theta);
            CHECK(r <= prev);
            prev = r;
        }
    }
}

TEST_CASE("nnar selection matches the model rates and favors the boundary") {
    CalibratedModel model = blob_model(21);
    Dataset d = testing::make_blobs(10000, 2, 1.0, 22);

    for (double theta : {0.25, 0.5, 0.75}) {
        Vector rates = nnar_rates(model, d.features, theta);
        CorruptionResult r = nnar_corrupt(d, model, theta, 55);
        CHECK(std::abs(selected_fraction(r) - rates.mean()) < 0.01);

        // Split by predicted boundary distance; the nearer half must be
        // selected at least as often as the farther half.
        Matrix probs = predict_proba_all(model, d.features);
        std::vector<Index> order(static_cast<std::size_t>(d.n_samples()));
        for (Index i = 0; i < d.n_samples(); ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(), [&](Index a, Index b) {
            return std::abs(probs(a, 1) - 0.5) < std::abs(probs(b, 1) - 0.5);
        });
        std::size_t half = order.size() / 2;
        double near = 0, far = 0;
        for (std::size_t j = 0; j < half; ++j)
            near += r.records[static_cast<std::size_t>(order[j])].selected ? 1 : 0;
        for (std::size_t j = half; j < order.size(); ++j)
            far += r.records[static_cast<std::size_t>(order[j])].selected ? 1 : 0;
        CHECK(near / static_cast<double>(half) >=
              far / static_cast<double>(order.size() - half));
    }
}

TEST_CASE("nnar at theta=0 corrupts everything and flips half") {
    CalibratedModel model = blob_model(31);
    Dataset d = testing::make_blobs(10000, 2, 1.0, 32);
    CorruptionResult r = nnar_corrupt(d, model, 0.0, 66);
    CHECK(selected_fraction(r) == 1.0);
    CHECK(std::abs(flip_fraction(r) - 0.5) < 0.01);
}

TEST_CASE("nnar flip fraction falls as quality rises") {
    CalibratedModel model = blob_model(41);
    Dataset d = testing::make_blobs(10000, 2, 1.0, 42);
    double prev = 1.0;
    int step = 0;
    for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        double frac = flip_fraction(nnar_corrupt(d, model, theta, 200 + step++));
        CHECK(frac <= prev + 0.01);
        prev = frac;
    }
}

TEST_CASE("nnar rejects non-binary problems") {
    CalibratedModel model = blob_model(51);
    Dataset d = testing::random_dataset(50, 2, 3, 52);
    CHECK_THROWS_AS(nnar_corrupt(d, model, 0.5, 1), UnsupportedError);

    CalibratedModel three;
    three.base.weights = Matrix::Zero(3, 2);
    three.base.bias = Vector::Zero(3);
    CHECK_THROWS_AS(nnar_rates(three, d.features, 0.5), UnsupportedError);
}

TEST_CASE("corruption traces serialize to csv") {
    std::vector<CorruptionRecord> records = {
        {0, 1, 1, false, false},
        {1, 0, 1, true, true},
        {2, 1, 1, true, false},
    };
    std::ostringstream out;
    write_corruption_csv(records, out);
    CHECK(out.str() ==
          "index,original_label,corrupted_label,selected,flipped\n"
          "0,1,1,0,0\n"
          "1,0,1,1,1\n"
          "2,1,1,1,0\n");
}
