#include "biq/model.hpp"

#include "biq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace biq {

namespace {

// Softmax probabilities via the log-sum-exp trick; returns lse so callers can
// form the loss as lse - z[y].
Vector softmax(const Vector& z, double& lse) {
    double m = z.maxCoeff();
    Vector e = (z.array() - m).exp();
    double s = e.sum();
    lse = m + std::log(s);
    return e / s;
}

// Cross-entropy gradient in score space: softmax(z) - e_y, or its
// transition-mixed form for examples scored through C^T softmax(z).
Vector logistic_grad_z(const Vector& z, int y, const Matrix* C, double& loss_out) {
    double lse;
    Vector p = softmax(z, lse);
    if (C == nullptr) {
        loss_out = lse - z[y];
        Vector g = p;
        g[y] -= 1.0;
        return g;
    }
    Vector mixed = C->transpose() * p;
    double my = std::max(mixed[y], 1e-300);
    loss_out = -std::log(my);
    Vector u = C->col(y) * (-1.0 / my);
    double dot = p.dot(u);
    return (p.array() * (u.array() - dot)).matrix();
}

}  // namespace

Vector score(const LinearModel& model, const Eigen::Ref<const Vector>& x) {
    if (x.size() != model.n_features())
        throw ConfigError("score: feature dimension mismatch");
    return model.weights * x + model.bias;
}

Matrix score_all(const LinearModel& model, const Matrix& x) {
    if (x.cols() != model.n_features())
        throw ConfigError("score: feature dimension mismatch");
    return (x * model.weights.transpose()).rowwise() + model.bias.transpose();
}

LinearModel sgd_fit(const Dataset& data, const Vector& weights, const SgdConfig& config,
                    LossKind loss, const TransitionSpec* transition) {
    const Index n = data.n_samples();
    const Index d = data.n_features();
    const Index k = data.n_classes;
    if (weights.size() != n) throw ConfigError("sgd_fit: weights not aligned with data");
    if ((weights.array() < 0).any()) throw ConfigError("sgd_fit: negative weight");
    if (config.learning_rate <= 0 || config.epochs < 1 || config.batch_size < 1)
        throw ConfigError("sgd_fit: bad SGD configuration");
    if (!data.features.allFinite()) throw TrainError("sgd_fit: NaN in features");
    if (transition != nullptr && loss != LossKind::logistic)
        throw ConfigError("sgd_fit: transition mixing requires the logistic loss");

    std::vector<Index> active;
    for (Index i = 0; i < n; ++i)
        if (weights[i] > 0) active.push_back(i);
    if (active.empty()) throw TrainError("sgd_fit: no effective training data");

    LinearModel model;
    model.loss = loss;
    model.weights = Matrix::Zero(k, d);
    model.bias = Vector::Zero(k);

    const bool unhinged = loss == LossKind::unhinged;
    if (unhinged && k != 2)
        throw UnsupportedError("unhinged loss is defined for binary tasks only");

    // Unhinged trains the margin vector directly; stored as rows (-v, +v).
    Vector v = Vector::Zero(d);
    double c = 0.0;

    Rng rng(config.seed);
    const auto batch = static_cast<std::size_t>(config.batch_size);
    Matrix grad_w(k, d);
    Vector grad_b(k), grad_v(d);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(active);
        for (std::size_t start = 0; start < active.size(); start += batch) {
            std::size_t stop = std::min(start + batch, active.size());
            double wsum = 0.0;
            if (unhinged) {
                grad_v.setZero();
                double grad_c = 0.0;
                for (std::size_t b = start; b < stop; ++b) {
                    Index i = active[b];
                    double w = weights[i];
                    int y_pm = data.labels[i] == 1 ? 1 : -1;
                    double g = w * unhinged_loss_grad(y_pm);
                    grad_v += g * data.features.row(i).transpose();
                    grad_c += g;
                    wsum += w;
                }
                grad_v /= wsum;
                grad_c /= wsum;
                grad_v += 2.0 * config.weight_decay * v;
                v -= config.learning_rate * grad_v;
                c -= config.learning_rate * grad_c;
            } else {
                grad_w.setZero();
                grad_b.setZero();
                for (std::size_t b = start; b < stop; ++b) {
                    Index i = active[b];
                    double w = weights[i];
                    Vector z = model.weights * data.features.row(i).transpose() + model.bias;
                    double loss_val;
                    const Matrix* C = nullptr;
                    if (transition != nullptr && transition->apply[static_cast<std::size_t>(i)])
                        C = &transition->C;
                    Vector gz = logistic_grad_z(z, data.labels[i], C, loss_val);
                    grad_w.noalias() += (w * gz) * data.features.row(i);
                    grad_b += w * gz;
                    wsum += w;
                }
                grad_w /= wsum;
                grad_b /= wsum;
                grad_w += 2.0 * config.weight_decay * model.weights;
                model.weights -= config.learning_rate * grad_w;
                model.bias -= config.learning_rate * grad_b;
            }
        }
    }

    if (unhinged) {
        model.weights.row(0) = -v.transpose();
        model.weights.row(1) = v.transpose();
        model.bias[0] = -c;
        model.bias[1] = c;
    }
    if (!model.weights.allFinite() || !model.bias.allFinite())
        throw TrainError("sgd_fit: training diverged to non-finite parameters");
    return model;
}

double example_loss(const LinearModel& model, const Eigen::Ref<const Vector>& x, int y) {
    Vector z = score(model, x);
    if (model.loss == LossKind::unhinged) {
        int y_pm = y == 1 ? 1 : -1;
        return unhinged_loss(z[1], y_pm);
    }
    double lse;
    softmax(z, lse);
    return lse - z[y];
}

double sgd_objective(const LinearModel& model, const Dataset& data, const Vector& weights,
                     double weight_decay, const TransitionSpec* transition) {
    const Index n = data.n_samples();
    if (weights.size() != n) throw ConfigError("sgd_objective: weights not aligned with data");
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        double loss_val;
        if (model.loss == LossKind::unhinged) {
            loss_val = example_loss(model, data.features.row(i).transpose(), data.labels[i]);
        } else {
            Vector z = score(model, data.features.row(i).transpose());
            const Matrix* C = nullptr;
            if (transition != nullptr && transition->apply[static_cast<std::size_t>(i)])
                C = &transition->C;
            logistic_grad_z(z, data.labels[i], C, loss_val);
        }
        total += weights[i] * loss_val;
    }
    double penalty = model.loss == LossKind::unhinged
                         ? model.weights.row(1).squaredNorm()
                         : model.weights.squaredNorm();
    return total / static_cast<double>(n) + weight_decay * penalty;
}

}  // namespace biq
