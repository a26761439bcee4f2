#pragma once

#include "biq/dataset.hpp"
#include "biq/rng.hpp"

#include <cmath>
#include <utility>

namespace biq::testing {

// Standard normal via Box-Muller on the deterministic stream.
inline double normal(Rng& rng) {
    double u1 = rng.uniform();
    double u2 = rng.uniform();
    if (u1 <= 0) u1 = 1e-12;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Two Gaussian blobs at +-center along every axis; labels 0/1 alternate.
inline Dataset make_blobs(Index n_per_class, Index dim, double center, std::uint64_t seed) {
    Rng rng(seed);
    Dataset out;
    out.n_classes = 2;
    out.features.resize(2 * n_per_class, dim);
    out.labels.resize(2 * n_per_class);
    for (Index i = 0; i < 2 * n_per_class; ++i) {
        int y = static_cast<int>(i % 2);
        out.labels[i] = y;
        for (Index j = 0; j < dim; ++j)
            out.features(i, j) = normal(rng) + (y == 1 ? center : -center);
    }
    return out;
}

// Features uniform in [-1, 1], labels uniform over K classes.
inline Dataset random_dataset(Index n, Index dim, int k, std::uint64_t seed) {
    Rng rng(seed);
    Dataset out;
    out.n_classes = k;
    out.features.resize(n, dim);
    out.labels.resize(n);
    for (Index i = 0; i < n; ++i) {
        out.labels[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        for (Index j = 0; j < dim; ++j) out.features(i, j) = 2.0 * rng.uniform() - 1.0;
    }
    return out;
}

}  // namespace biq::testing
