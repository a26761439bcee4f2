#include "biq/isotonic.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace biq {

double IsotonicCalibrator::predict(double s) const {
    const Index m = thresholds.size();
    if (m == 0) return 0.5;
    if (s <= thresholds[0]) return values[0];
    if (s >= thresholds[m - 1]) return values[m - 1];
    // First breakpoint strictly above s.
    const double* begin = thresholds.data();
    Index hi = std::upper_bound(begin, begin + m, s) - begin;
    Index lo = hi - 1;
    double t = (s - thresholds[lo]) / (thresholds[hi] - thresholds[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

IsotonicCalibrator isotonic_fit(const Vector& scores, const Vector& targets,
                                const Vector& weights) {
    const Index n = scores.size();
    if (targets.size() != n || weights.size() != n)
        throw ConfigError("isotonic_fit: input lengths differ");

    std::vector<Index> order;
    for (Index i = 0; i < n; ++i)
        if (weights[i] > 0) order.push_back(i);
    if (order.empty()) throw ConfigError("isotonic_fit: no positively weighted pairs");
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return scores[a] < scores[b]; });

    // Pool tied scores, then run PAVA over the distinct points.
    struct Block {
        double x;
        double w;
        double wy;
        double mean() const { return wy / w; }
    };
    std::vector<Block> points;
    for (Index i : order) {
        if (!points.empty() && points.back().x == scores[i]) {
            points.back().w += weights[i];
            points.back().wy += weights[i] * targets[i];
        } else {
            points.push_back({scores[i], weights[i], weights[i] * targets[i]});
        }
    }

    std::vector<Block> stack;
    std::vector<int> span;  // distinct points merged into each stack block
    for (const Block& pt : points) {
        stack.push_back(pt);
        span.push_back(1);
        while (stack.size() >= 2 && stack[stack.size() - 2].mean() > stack.back().mean()) {
            stack[stack.size() - 2].w += stack.back().w;
            stack[stack.size() - 2].wy += stack.back().wy;
            span[span.size() - 2] += span.back();
            stack.pop_back();
            span.pop_back();
        }
    }

    IsotonicCalibrator cal;
    cal.thresholds.resize(static_cast<Index>(points.size()));
    cal.values.resize(static_cast<Index>(points.size()));
    Index at = 0;
    for (std::size_t b = 0; b < stack.size(); ++b) {
        double v = std::clamp(stack[b].mean(), kProbClip, 1.0 - kProbClip);
        for (int r = 0; r < span[b]; ++r, ++at) {
            cal.thresholds[at] = points[static_cast<std::size_t>(at)].x;
            cal.values[at] = v;
        }
    }
    return cal;
}

}  // namespace biq
