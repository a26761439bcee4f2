#pragma once

#include "biq/types.hpp"

namespace biq {

// Nondecreasing step function fitted on (score, target) pairs; prediction
// interpolates linearly between breakpoints and is constant outside them.
// Fitted values are clipped to [kProbClip, 1 - kProbClip].
struct IsotonicCalibrator {
    Vector thresholds;  // strictly increasing scores
    Vector values;      // nondecreasing fitted values

    double predict(double s) const;
};

// Weighted least-squares monotone fit by pool-adjacent-violators. Tied
// scores are pooled into one point first. Zero-weight pairs are ignored;
// a single distinct score yields a single-level calibrator at the weighted
// target mean.
IsotonicCalibrator isotonic_fit(const Vector& scores, const Vector& targets,
                                const Vector& weights);

}  // namespace biq
