#pragma once

#include "biq/dataset.hpp"
#include "biq/types.hpp"

#include <cstdint>
#include <vector>

namespace biq {

enum class LossKind { logistic, unhinged };

// Hyperparameters for mini-batch SGD.
struct SgdConfig {
    double learning_rate = 0.005;
    double weight_decay = 1e-6;
    int epochs = 20;
    int batch_size = 24;
    std::uint64_t seed = 0;
};

// Linear scorer, one weight row and bias per class. The unhinged variant is
// kept in the same shape under the symmetric parameterization: row 1 holds
// the margin vector v, row 0 holds -v, so score(x) = (-m, +m) with
// m = v.x + c and the decision is the sign of the margin.
struct LinearModel {
    Matrix weights;  // K x n_features
    Vector bias;     // K
    LossKind loss = LossKind::logistic;

    Index n_classes() const { return weights.rows(); }
    Index n_features() const { return weights.cols(); }
};

// Raw scores W x + b.
Vector score(const LinearModel& model, const Eigen::Ref<const Vector>& x);
Matrix score_all(const LinearModel& model, const Matrix& x);

// L(s, y) = 1 - y s for y in {-1, +1}; gradient with respect to s is -y.
inline double unhinged_loss(double s, int y_pm) { return 1.0 - y_pm * s; }
inline double unhinged_loss_grad(int y_pm) { return -static_cast<double>(y_pm); }

// Optional per-example label-transition mixing: examples with apply[i] set
// are scored through C^T softmax(z) inside the loss.
struct TransitionSpec {
    Matrix C;                 // K x K, row-stochastic
    std::vector<char> apply;  // one flag per example
};

// Weighted mini-batch SGD from zero initialization. Zero-weight examples are
// removed up front; each batch step follows the weight-normalized gradient
//   sum_B w_i grad L_i / sum_B w_i + decay terms,
// so a zero-weight sample never influences the fit and doubling a weight is
// equivalent to duplicating the sample. Weight decay acts on the weight
// matrix (the margin vector for the unhinged loss), not the bias.
// Deterministic in config.seed; reshuffles every epoch, keeps the last
// partial batch.
LinearModel sgd_fit(const Dataset& data, const Vector& weights, const SgdConfig& config,
                    LossKind loss, const TransitionSpec* transition = nullptr);

// Loss of one example under the model's loss kind (logistic cross-entropy on
// softmax scores, or the unhinged margin loss).
double example_loss(const LinearModel& model, const Eigen::Ref<const Vector>& x, int y);

// Evaluation form of the training objective at fixed parameters:
//   (1/n) sum_i w_i L_i + weight_decay * ||W||^2,
// linear in the weight vector up to the constant decay term.
double sgd_objective(const LinearModel& model, const Dataset& data, const Vector& weights,
                     double weight_decay, const TransitionSpec* transition = nullptr);

}  // namespace biq
