#include "biq/isotonic.hpp"

#include "biq/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

using namespace biq;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Vector ones(Index n) { return Vector::Ones(n); }

// Exhaustive monotone least squares: every partition of the sorted points into
// consecutive blocks, each block fitted at its weighted mean, keeping only
// partitions whose block means are nondecreasing.
struct ExhaustiveFit {
    std::vector<double> fitted;  // per sorted point, clipped like the library
    double sse = std::numeric_limits<double>::infinity();
};

ExhaustiveFit exhaustive_isotonic(const std::vector<double>& y, const std::vector<double>& w) {
    std::size_t n = y.size();
    ExhaustiveFit best;
    std::size_t masks = std::size_t{1} << (n - 1);  // cut after point i if bit i set
    for (std::size_t mask = 0; mask < masks; ++mask) {
        std::vector<double> fitted(n);
        double prev = -std::numeric_limits<double>::infinity();
        bool monotone = true;
        double sse = 0.0;
        std::size_t start = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool cut = i + 1 == n || (mask >> i) & 1;
            if (!cut) continue;
            double sw = 0.0, swy = 0.0;
            for (std::size_t j = start; j <= i; ++j) {
                sw += w[j];
                swy += w[j] * y[j];
            }
            double mean = swy / sw;
            if (mean < prev) {
                monotone = false;
                break;
            }
            for (std::size_t j = start; j <= i; ++j) {
                fitted[j] = mean;
                sse += w[j] * (y[j] - mean) * (y[j] - mean);
            }
            prev = mean;
            start = i + 1;
        }
        if (monotone && sse < best.sse) {
            best.sse = sse;
            best.fitted = fitted;
        }
    }
    for (double& v : best.fitted) v = std::min(1.0 - kProbClip, std::max(kProbClip, v));
    return best;
}

}  // namespace

TEST_CASE("already monotone targets are kept, clipped to the probability band") {
    IsotonicCalibrator c = isotonic_fit(vec({0, 1, 2}), vec({0, 1, 1}), ones(3));
    REQUIRE(c.values.size() == 3);
    CHECK(c.values[0] == kProbClip);
    CHECK(c.values[1] == 1.0 - kProbClip);
    CHECK(c.values[2] == 1.0 - kProbClip);
}

TEST_CASE("a violation pools adjacent points at their mean") {
    IsotonicCalibrator c = isotonic_fit(vec({0, 1, 2}), vec({1, 0, 1}), ones(3));
    REQUIRE(c.values.size() == 3);
    CHECK(c.values[0] == doctest::Approx(0.5));
    CHECK(c.values[1] == doctest::Approx(0.5));
    CHECK(c.values[2] == 1.0 - kProbClip);
}

TEST_CASE("constant targets collapse to one clipped level") {
    IsotonicCalibrator c = isotonic_fit(vec({0, 1, 2, 3}), vec({0, 0, 0, 0}), ones(4));
    for (Index i = 0; i < c.values.size(); ++i) CHECK(c.values[i] == kProbClip);
}

TEST_CASE("tied scores pool before fitting") {
    IsotonicCalibrator c = isotonic_fit(vec({1, 1, 2}), vec({0, 1, 1}), ones(3));
    REQUIRE(c.thresholds.size() == 2);
    CHECK(c.thresholds[0] == 1.0);
    CHECK(c.values[0] == doctest::Approx(0.5));
}

TEST_CASE("zero-weight pairs are ignored") {
    IsotonicCalibrator with = isotonic_fit(vec({0, 1, 2}), vec({0, 1, 0.25}), vec({1, 0, 1}));
    IsotonicCalibrator without = isotonic_fit(vec({0, 2}), vec({0, 0.25}), ones(2));
    REQUIRE(with.thresholds.size() == without.thresholds.size());
    CHECK((with.values - without.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a single distinct score yields the weighted mean level") {
    IsotonicCalibrator c = isotonic_fit(vec({3, 3}), vec({0, 1}), vec({1, 3}));
    REQUIRE(c.values.size() == 1);
    CHECK(c.values[0] == doctest::Approx(0.75));
    CHECK(c.predict(-100.0) == doctest::Approx(0.75));
    CHECK(c.predict(100.0) == doctest::Approx(0.75));
}

TEST_CASE("prediction interpolates between breakpoints and clamps outside") {
    IsotonicCalibrator c = isotonic_fit(vec({0, 2}), vec({0.2, 0.8}), ones(2));
    CHECK(c.predict(0.0) == doctest::Approx(0.2));
    CHECK(c.predict(1.0) == doctest::Approx(0.5));
    CHECK(c.predict(1.5) == doctest::Approx(0.65));
    CHECK(c.predict(2.0) == doctest::Approx(0.8));
    CHECK(c.predict(-5.0) == doctest::Approx(0.2));
    CHECK(c.predict(9.0) == doctest::Approx(0.8));
}

TEST_CASE("fitted values are always nondecreasing") {
    Rng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        Index n = 2 + static_cast<Index>(rng.below(30));
        Vector s(n), t(n), w(n);
        for (Index i = 0; i < n; ++i) {
            s[i] = rng.uniform() * 10.0;
            t[i] = rng.uniform();
            w[i] = 0.25 + rng.uniform();
        }
        IsotonicCalibrator c = isotonic_fit(s, t, w);
        for (Index i = 0; i + 1 < c.thresholds.size(); ++i) {
            CHECK(c.thresholds[i] < c.thresholds[i + 1]);
            CHECK(c.values[i] <= c.values[i + 1]);
        }
        for (int probe = 0; probe < 20; ++probe) {
            double a = rng.uniform() * 12.0 - 1.0;
            double b = rng.uniform() * 12.0 - 1.0;
            if (a > b) std::swap(a, b);
            CHECK(c.predict(a) <= c.predict(b) + 1e-15);
        }
    }
}

TEST_CASE("pool-adjacent-violators matches exhaustive monotone least squares") {
    Rng rng(505);
    for (int trial = 0; trial < 120; ++trial) {
        std::size_t n = 1 + rng.below(8);
        std::vector<double> y(n), w(n);
        Vector s(static_cast<Index>(n)), t(static_cast<Index>(n)), wt(static_cast<Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform();
            w[i] = 0.25 + rng.uniform();
            s[static_cast<Index>(i)] = static_cast<double>(i);  // distinct, sorted
            t[static_cast<Index>(i)] = y[i];
            wt[static_cast<Index>(i)] = w[i];
        }
        ExhaustiveFit oracle = exhaustive_isotonic(y, w);
        IsotonicCalibrator c = isotonic_fit(s, t, wt);
        REQUIRE(static_cast<std::size_t>(c.thresholds.size()) == n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(c.values[static_cast<Index>(i)] ==
                  doctest::Approx(oracle.fitted[i]).epsilon(1e-6));
    }
}
