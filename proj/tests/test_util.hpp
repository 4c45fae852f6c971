#pragma once

#include <random>

#include "texturefuse/tensor.hpp"

namespace texturefuse::test {

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor<T> t(shape);
    for (auto& v : t.values()) v = T(d(rng));
    return t;
}

// Reference cross-correlation by direct summation over padded coordinates.
inline Tensor<double> brute_force_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                                       std::size_t sh, std::size_t sw, std::size_t ph, std::size_t pw,
                                       std::size_t groups = 1) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t O = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const std::size_t Ho = (H + 2 * ph - kh) / sh + 1, Wo = (W + 2 * pw - kw) / sw + 1;
    (void)C;
    Tensor<double> y({O, Ho, Wo});
    for (std::size_t o = 0; o < O; ++o) {
        const std::size_t g = o / (O / groups);
        for (std::size_t i = 0; i < Ho; ++i)
            for (std::size_t j = 0; j < Wo; ++j) {
                double s = b[o];
                for (std::size_t c = 0; c < Cg; ++c)
                    for (std::size_t u = 0; u < kh; ++u)
                        for (std::size_t v = 0; v < kw; ++v) {
                            const long ih = long(i * sh + u) - long(ph), iw = long(j * sw + v) - long(pw);
                            if (ih < 0 || iw < 0 || ih >= long(H) || iw >= long(W)) continue;
                            s += w[((o * Cg + c) * kh + u) * kw + v] * x(g * Cg + c, std::size_t(ih), std::size_t(iw));
                        }
                y(o, i, j) = s;
            }
    }
    return y;
}

}  // namespace texturefuse::test
