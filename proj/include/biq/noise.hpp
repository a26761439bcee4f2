#pragma once

#include "biq/calibrate.hpp"
#include "biq/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace biq {

enum class NoiseKind { ncar, nnar };

NoiseKind parse_noise_kind(const std::string& name);
std::string noise_kind_name(NoiseKind kind);

// Per-example corruption trace. selected means the example was drawn for
// relabeling; flipped means the drawn label differs from the original.
struct CorruptionRecord {
    Index index;
    int original_label;
    int corrupted_label;
    bool selected;
    bool flipped;
};

struct CorruptionResult {
    Dataset data;
    std::vector<CorruptionRecord> records;
};

// Completely-at-random corruption: each example is selected with rate
// r = 1 - q; a selected example gets a label drawn uniformly over all
// classes, so it keeps its original label with probability 1/K.
CorruptionResult ncar_corrupt(const Dataset& data, double q, std::uint64_t seed);

// Not-at-random selection rate for one example with positive-class
// probability p1. theta = q tunes difficulty: theta = 0 corrupts
// everything, theta = 1 concentrates corruption near the boundary.
double nnar_rate(double p1, double theta);
Vector nnar_rates(const CalibratedModel& total_model, const Matrix& features, double theta);

// Not-at-random corruption (binary only): selection rate follows
// nnar_rate under total_model; a selected example gets a uniform label
// over {0,1}, so it keeps its original label half the time.
CorruptionResult nnar_corrupt(const Dataset& data, const CalibratedModel& total_model,
                              double theta, std::uint64_t seed);

void write_corruption_csv(const std::vector<CorruptionRecord>& records, std::ostream& out);

}  // namespace biq
