#pragma once

// Central-difference gradient checks shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.hpp"
#include "texturefuse/network.hpp"

namespace texturefuse::test {

struct GradCheck {
    double worst = 0;
    void add(double analytic, double numeric) {
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
};

// Loss = sum(r .* forward(x)); checks d loss / d input and d loss / d params.
inline GradCheck check_network(Network<double>& net, const Tensor<double>& x0, std::uint64_t seed, bool training = false) {
    std::mt19937_64 rrng(seed);
    auto rng_for_forward = [&] { return std::mt19937_64(seed + 1); };
    auto r0 = rng_for_forward();
    const auto tr = net.forward_train(x0, r0, npos, training);
    const auto r = random_tensor<double>(tr.output().shape(), rrng);
    auto grads = net.zero_gradients();
    const auto dx = net.backward(tr, r, grads);

    auto loss = [&](const Tensor<double>& x) {
        auto rr = rng_for_forward();
        const auto t = net.forward_train(x, rr, npos, training);
        double l = 0;
        for (std::size_t i = 0; i < r.size(); ++i) l += r[i] * t.output()[i];
        return l;
    };
    const double h = 1e-4;
    GradCheck gc;
    Tensor<double> x = x0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double lp = loss(x);
        x[i] = keep - h;
        const double lm = loss(x);
        x[i] = keep;
        gc.add(dx[i], (lp - lm) / (2 * h));
    }
    for (std::size_t p = 0; p < net.parameters().size(); ++p) {
        auto& P = net.parameters()[p];
        for (std::size_t i = 0; i < P.size(); ++i) {
            const double keep = P[i];
            P[i] = keep + h;
            const double lp = loss(x0);
            P[i] = keep - h;
            const double lm = loss(x0);
            P[i] = keep;
            gc.add(grads[p][i], (lp - lm) / (2 * h));
        }
    }
    return gc;
}

// Inputs with well separated values so that max and relu stay away from kinks.
inline Tensor<double> separated_input(const Shape& shape, std::mt19937_64& rng) {
    Tensor<double> x(shape);
    std::vector<double> vals(x.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = (double(i) + 0.25) / double(vals.size()) * 2.0 - 1.0;
    std::shuffle(vals.begin(), vals.end(), rng);
    for (std::size_t i = 0; i < vals.size(); ++i) x[i] = vals[i];
    return x;
}


// One layer of the given kind, varied by shape index.
inline LayerSpec gradcheck_layer(LayerKind kind, std::size_t si) {
    switch (kind) {
        case LayerKind::conv:
            return LayerSpec::conv("conv", 3 + si % 2, {1 + si % 3, 2 + si % 2}, {1 + si % 2, 1}, {si % 2, 1}, si % 2 == 0);
        case LayerKind::maxpool: return LayerSpec::maxpool("pool", {2, 2}, {2, 2});
        case LayerKind::avgpool: return LayerSpec::avgpool("pool", {2, 3}, {2, 2});
        case LayerKind::lrn: return LayerSpec::local_response_norm("lrn", {3, 0.5, 0.75, 1.0});
        case LayerKind::relu: return LayerSpec::rectifier("relu");
        case LayerKind::dropout: return LayerSpec::dropout("drop", 0.5);
        case LayerKind::softmax: return LayerSpec::softmax("prob");
    }
    return LayerSpec::rectifier("relu");
}

inline const std::vector<Shape>& gradcheck_shapes() {
    static const std::vector<Shape> s = {{2, 5, 5}, {3, 6, 4}, {1, 7, 9}, {4, 3, 8}, {6, 5, 6}};
    return s;
}

}  // namespace texturefuse::test
