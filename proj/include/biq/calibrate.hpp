#pragma once

#include "biq/isotonic.hpp"
#include "biq/model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace biq {

// Linear scorer plus one isotonic calibrator per class. predict_proba rows
// are clipped to [kProbClip, 1 - kProbClip] and renormalized to sum to 1.
struct CalibratedModel {
    LinearModel base;
    std::vector<IsotonicCalibrator> calibrators;
    std::vector<std::string> warnings;
};

// 3-fold cross-fitting: per-class calibrators are fitted on pooled
// out-of-fold (score, one-vs-rest target) pairs, then the base model is
// refit on all data. Classes with fewer than 3 samples fall back to
// in-sample calibration (recorded in warnings).
CalibratedModel fit_calibrated(const Dataset& data, const Vector& weights,
                               const SgdConfig& config, LossKind loss,
                               const TransitionSpec* transition = nullptr);

Vector predict_proba(const CalibratedModel& model, const Eigen::Ref<const Vector>& x);
Matrix predict_proba_all(const CalibratedModel& model, const Matrix& x);

// Argmax of predict_proba; ties break toward the lowest class index.
int predict(const CalibratedModel& model, const Eigen::Ref<const Vector>& x);
IntVector predict_all(const CalibratedModel& model, const Matrix& x);

// Structured text round-trip of weights, bias and calibrator breakpoints.
void save_model(const CalibratedModel& model, std::ostream& out);
CalibratedModel load_model(std::istream& in);
void save_model_file(const CalibratedModel& model, const std::string& path);
CalibratedModel load_model_file(const std::string& path);

}  // namespace biq
