#pragma once

#include "ussl/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl {

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OptimizerKind { sgd, adamw };

/// Velocity (SGD) or first/second moments (AdamW), one tensor per parameter.
struct OptimizerState {
    std::vector<Tensor> first;
    std::vector<Tensor> second;
    std::uint64_t steps = 0;

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

namespace detail {

inline void check_grads(const std::vector<Parameter>& params, const std::vector<Tensor>& grads, const char* op) {
    if (grads.size() != params.size()) throw ShapeError(std::string(op) + ": gradient count differs from parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape != params[i].value.shape) {
            throw ShapeError(std::string(op) + ": gradient for '" + params[i].name + "' has shape " + shape_str(grads[i].shape) +
                             ", parameter has " + shape_str(params[i].value.shape));
        }
        if (!grads[i].all_finite()) throw NonFiniteGradient(std::string(op) + ": non-finite gradient in '" + params[i].name + "'");
    }
}

inline void ensure_slots(std::vector<Tensor>& slots, const std::vector<Parameter>& params) {
    if (slots.size() == params.size()) return;
    slots.clear();
    for (const auto& p : params) slots.emplace_back(p.value.shape, 0.0);
}

}  // namespace detail

/// velocity <- momentum * velocity + grad + weight_decay * param; param <- param - lr * velocity
inline void sgd_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads, OptimizerState& state, double lr,
                     double momentum, double weight_decay) {
    if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be positive");
    detail::check_grads(params, grads, "sgd_step");
    detail::ensure_slots(state.first, params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].value.values;
        auto& v = state.first[i].values;
        const auto& g = grads[i].values;
        for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = momentum * v[j] + g[j] + weight_decay * p[j];
            p[j] -= lr * v[j];
        }
    }
    ++state.steps;
}

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Decoupled weight decay (param shrinks by lr * wd * param) followed by the
/// bias-corrected Adam step.
inline void adamw_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads, OptimizerState& state, double lr,
                       const AdamParams& adam, double weight_decay) {
    if (!(lr > 0.0)) throw std::invalid_argument("adamw_step: lr must be positive");
    detail::check_grads(params, grads, "adamw_step");
    detail::ensure_slots(state.first, params);
    detail::ensure_slots(state.second, params);
    ++state.steps;
    const double t = static_cast<double>(state.steps);
    const double c1 = 1.0 - std::pow(adam.beta1, t);
    const double c2 = 1.0 - std::pow(adam.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].value.values;
        auto& m = state.first[i].values;
        auto& v = state.second[i].values;
        const auto& g = grads[i].values;
        for (std::size_t j = 0; j < p.size(); ++j) {
            p[j] -= lr * weight_decay * p[j];
            m[j] = adam.beta1 * m[j] + (1.0 - adam.beta1) * g[j];
            v[j] = adam.beta2 * v[j] + (1.0 - adam.beta2) * g[j] * g[j];
            p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + adam.eps);
        }
    }
}

enum class Schedule { cosine, annealing, constant };

/// lr0 * cos(factor * pi * t / T). With factor 0.5 this falls from lr0 to 0.
inline double cosine_lr(std::size_t step, std::size_t total, double lr0, double factor) {
    if (total == 0 || step > total) throw std::invalid_argument("cosine_lr: need 0 <= step <= total, total > 0");
    // cos(a) written as sin(pi/2 - a) so both endpoints are exact: sin(pi/2) == 1 and,
    // for factor 0.5 at t = T, sin(0) == 0 (std::cos(pi/2) would give 6e-17).
    const double progress = factor * static_cast<double>(step) / static_cast<double>(total);
    return lr0 * std::sin((0.5 - progress) * std::numbers::pi);
}

/// Half-period annealing lr0 * (1 + cos(pi t / T)) / 2.
inline double annealing_lr(std::size_t step, std::size_t total, double lr0) {
    if (total == 0 || step > total) throw std::invalid_argument("annealing_lr: need 0 <= step <= total, total > 0");
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

inline double scheduled_lr(Schedule s, std::size_t step, std::size_t total, double lr0, double factor) {
    switch (s) {
        case Schedule::cosine: return cosine_lr(step, total, lr0, factor);
        case Schedule::annealing: return annealing_lr(step, total, lr0);
        case Schedule::constant: return lr0;
    }
    return lr0;
}

}  // namespace ussl
