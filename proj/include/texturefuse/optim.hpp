#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "texturefuse/network.hpp"
#include "texturefuse/tensor.hpp"

namespace texturefuse {

/// Step decay: lr(i) = base_lr * gamma^floor(i / step_every), for 0 <= i < total_iters.
struct LrSchedule {
    double base_lr = 1e-4;
    double gamma = 0.1;
    std::size_t step_every = 1;
    std::size_t total_iters = 1;

    void validate() const {
        if (!(base_lr > 0.0) || !(gamma > 0.0) || step_every < 1 || total_iters < 1)
            throw RangeError("learning-rate schedule needs base_lr > 0, gamma > 0, step_every >= 1, total_iters >= 1");
    }
};

inline double lr_at(const LrSchedule& s, std::size_t iter) {
    s.validate();
    if (iter >= s.total_iters)
        throw RangeError("iteration " + std::to_string(iter) + " outside schedule of " +
                         std::to_string(s.total_iters) + " iterations");
    return s.base_lr * std::pow(s.gamma, double(iter / s.step_every));
}

/// Adam moments for one parameter set.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;

    static AdamState for_parameters(const std::vector<Tensor<T>>& params, double weight_decay = 0.0) {
        AdamState s;
        for (const auto& p : params) {
            s.m.emplace_back(p.shape());
            s.v.emplace_back(p.shape());
        }
        s.weight_decay = weight_decay;
        return s;
    }
};

/// One Adam update with bias correction. The L2 term weight_decay * param is
/// added to the gradient before the moment updates. Elements whose effective
/// gradient is exactly zero keep their parameter and moments. Per-parameter
/// learning-rate multipliers are optional; labels name parameters in errors.
/// A non-finite gradient rejects the whole step before anything is modified.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, const Gradients<T>& grads, AdamState<T>& state, double lr,
               std::span<const double> lr_multipliers = {}, std::span<const std::string> labels = {}) {
    if (!(lr > 0.0)) throw RangeError("learning rate must be positive");
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeError("Adam: parameter, gradient and moment counts differ");
    if (!lr_multipliers.empty() && lr_multipliers.size() != params.size())
        throw ShapeError("Adam: one learning-rate multiplier per parameter required");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i].shape() || state.m[i].shape() != params[i].shape() ||
            state.v[i].shape() != params[i].shape())
            throw ShapeError("Adam: shape mismatch for parameter " + std::to_string(i));
        if (!grads[i].all_finite())
            throw NumericError("Adam: non-finite gradient in " +
                               (i < labels.size() ? labels[i] : "parameter " + std::to_string(i)));
    }
    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, double(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, double(state.t));
    const T b1 = T(state.beta1), b2 = T(state.beta2), wd = T(state.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double step = lr * (lr_multipliers.empty() ? 1.0 : lr_multipliers[i]);
        auto p = params[i].values();
        auto m = state.m[i].values();
        auto v = state.v[i].values();
        const auto g = grads[i].values();
        for (std::size_t k = 0; k < p.size(); ++k) {
            const T gk = g[k] + wd * p[k];
            if (gk == T(0)) continue;
            m[k] = b1 * m[k] + (T(1) - b1) * gk;
            v[k] = b2 * v[k] + (T(1) - b2) * gk * gk;
            const double mhat = double(m[k]) / c1, vhat = double(v[k]) / c2;
            p[k] -= T(step * mhat / (std::sqrt(vhat) + state.epsilon));
        }
    }
}

}  // namespace texturefuse
