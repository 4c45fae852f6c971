#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "texturefuse/tensor.hpp"

namespace texturefuse {

enum class LayerKind { conv, maxpool, avgpool, lrn, relu, dropout, softmax };

inline const char* kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::avgpool: return "avgpool";
        case LayerKind::lrn: return "lrn";
        case LayerKind::relu: return "relu";
        case LayerKind::dropout: return "dropout";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

inline std::optional<LayerKind> parse_kind(const std::string& s) {
    for (auto k : {LayerKind::conv, LayerKind::maxpool, LayerKind::avgpool, LayerKind::lrn, LayerKind::relu,
                   LayerKind::dropout, LayerKind::softmax})
        if (s == kind_name(k)) return k;
    return std::nullopt;
}

/// Across-channel local response normalization constants:
/// y = x * (k + alpha/n * sum_{window} x^2)^-beta
struct LrnParams {
    std::size_t n = 5;
    double alpha = 1e-4;
    double beta = 0.75;
    double k = 2.0;
    friend bool operator==(const LrnParams&, const LrnParams&) = default;
};

/// One row of a network description.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::string name;
    Extent2 kernel{1, 1};
    Extent2 stride{1, 1};
    Extent2 padding{0, 0};
    std::size_t out_channels = 0;  // conv only
    std::size_t groups = 1;        // conv only
    bool relu = false;             // rectifier fused onto the conv output
    double dropout_rate = 0.0;
    LrnParams lrn{};
    bool ceil_mode = true;  // pooling output sizing

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;

    static LayerSpec conv(std::string name, std::size_t out, Extent2 kernel, Extent2 stride = {1, 1},
                          Extent2 padding = {0, 0}, bool relu = true) {
        LayerSpec l;
        l.kind = LayerKind::conv;
        l.name = std::move(name);
        l.out_channels = out;
        l.kernel = kernel;
        l.stride = stride;
        l.padding = padding;
        l.relu = relu;
        return l;
    }
    static LayerSpec maxpool(std::string name, Extent2 kernel, Extent2 stride) {
        LayerSpec l;
        l.kind = LayerKind::maxpool;
        l.name = std::move(name);
        l.kernel = kernel;
        l.stride = stride;
        return l;
    }
    static LayerSpec avgpool(std::string name, Extent2 kernel, Extent2 stride) {
        LayerSpec l = maxpool(std::move(name), kernel, stride);
        l.kind = LayerKind::avgpool;
        return l;
    }
    static LayerSpec local_response_norm(std::string name, LrnParams p = {}) {
        LayerSpec l;
        l.kind = LayerKind::lrn;
        l.name = std::move(name);
        l.lrn = p;
        return l;
    }
    static LayerSpec rectifier(std::string name) {
        LayerSpec l;
        l.kind = LayerKind::relu;
        l.name = std::move(name);
        return l;
    }
    static LayerSpec dropout(std::string name, double rate = 0.5) {
        LayerSpec l;
        l.kind = LayerKind::dropout;
        l.name = std::move(name);
        l.dropout_rate = rate;
        return l;
    }
    static LayerSpec softmax(std::string name) {
        LayerSpec l;
        l.kind = LayerKind::softmax;
        l.name = std::move(name);
        return l;
    }

    bool has_window() const {
        return kind == LayerKind::conv || kind == LayerKind::maxpool || kind == LayerKind::avgpool;
    }

    void validate() const {
        auto fail = [&](const std::string& what) { throw RangeError("layer '" + name + "': " + what); };
        if (kernel.h < 1 || kernel.w < 1) fail("kernel extents must be >= 1");
        if (stride.h < 1 || stride.w < 1) fail("stride extents must be >= 1");
        if (kind == LayerKind::conv) {
            if (out_channels < 1) fail("conv needs out_channels >= 1");
            if (groups < 1 || out_channels % groups != 0) fail("out_channels must divide into groups");
        }
        if (kind == LayerKind::dropout && !(dropout_rate >= 0.0 && dropout_rate < 1.0))
            fail("dropout rate must lie in [0,1)");
        if (kind == LayerKind::lrn && (lrn.n < 1 || lrn.n % 2 == 0)) fail("LRN window must be odd");
    }
};

/// Per-side padding. Pool padding cells never win a max and are excluded from averages.
struct Pad4 {
    std::size_t top = 0, bottom = 0, left = 0, right = 0;
    friend bool operator==(const Pad4&, const Pad4&) = default;
};

/// Window count along one axis for explicit per-side padding.
inline std::size_t window_count(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t before,
                                std::size_t after) {
    if (in + before + after < kernel)
        throw ShapeError("kernel " + std::to_string(kernel) + " exceeds padded extent " +
                         std::to_string(in + before + after));
    return (in + before + after - kernel) / stride + 1;
}

struct AxisGeometry {
    std::size_t out = 0;
    std::size_t pad_before = 0;
    std::size_t pad_after = 0;
};

/// Output extent and effective padding along one axis. Ceil-mode pooling keeps
/// a trailing partial window; its overhang is expressed as extra after-padding.
inline AxisGeometry axis_geometry(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                                  bool ceil_mode) {
    const std::size_t padded = in + 2 * pad;
    if (padded < kernel)
        throw ShapeError("kernel " + std::to_string(kernel) + " exceeds padded extent " + std::to_string(padded));
    std::size_t out = ceil_mode ? (padded - kernel + stride - 1) / stride + 1 : (padded - kernel) / stride + 1;
    // the last window must start inside the input or its leading padding
    if (ceil_mode && (out - 1) * stride >= in + pad) --out;
    const std::size_t end = (out - 1) * stride + kernel;  // in padded coordinates
    return {out, pad, end > in + pad ? end - in - pad : 0};
}

struct LayerGeometry {
    Extent2 out;
    Pad4 pad;
};

inline LayerGeometry layer_geometry(const LayerSpec& layer, Extent2 in) {
    if (!layer.has_window()) return {in, {}};
    const bool ceil = layer.kind != LayerKind::conv && layer.ceil_mode;
    try {
        const auto gh = axis_geometry(in.h, layer.kernel.h, layer.stride.h, layer.padding.h, ceil);
        const auto gw = axis_geometry(in.w, layer.kernel.w, layer.stride.w, layer.padding.w, ceil);
        return {{gh.out, gw.out}, {gh.pad_before, gh.pad_after, gw.pad_before, gw.pad_after}};
    } catch (const ShapeError& e) {
        throw ShapeError("layer '" + layer.name + "' on " + std::to_string(in.h) + "x" + std::to_string(in.w) +
                         " input: " + e.what());
    }
}

inline std::size_t output_channels(const LayerSpec& layer, std::size_t in_channels) {
    return layer.kind == LayerKind::conv ? layer.out_channels : in_channels;
}

namespace kernels {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
    std::size_t C, H, W, kh, kw, sh, sw, Ho, Wo;
    Pad4 pad;
};

// Unfolds channels [c0, c0+cn) into a [cn*kh*kw, Ho*Wo] patch matrix; padding reads as zero.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t c0, std::size_t cn, T* col) {
    const std::size_t P = g.Ho * g.Wo;
    for (std::size_t c = 0; c < cn; ++c) {
        const T* xc = x + (c0 + c) * g.H * g.W;
        for (std::size_t i = 0; i < g.kh; ++i)
            for (std::size_t j = 0; j < g.kw; ++j) {
                T* row = col + ((c * g.kh + i) * g.kw + j) * P;
                for (std::size_t oh = 0; oh < g.Ho; ++oh) {
                    const std::ptrdiff_t ih = std::ptrdiff_t(oh * g.sh + i) - std::ptrdiff_t(g.pad.top);
                    T* dst = row + oh * g.Wo;
                    if (ih < 0 || ih >= std::ptrdiff_t(g.H)) {
                        std::fill_n(dst, g.Wo, T(0));
                        continue;
                    }
                    const T* src = xc + ih * g.W;
                    for (std::size_t ow = 0; ow < g.Wo; ++ow) {
                        const std::ptrdiff_t iw = std::ptrdiff_t(ow * g.sw + j) - std::ptrdiff_t(g.pad.left);
                        dst[ow] = (iw < 0 || iw >= std::ptrdiff_t(g.W)) ? T(0) : src[iw];
                    }
                }
            }
    }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, std::size_t c0, std::size_t cn, T* dx) {
    const std::size_t P = g.Ho * g.Wo;
    for (std::size_t c = 0; c < cn; ++c) {
        T* xc = dx + (c0 + c) * g.H * g.W;
        for (std::size_t i = 0; i < g.kh; ++i)
            for (std::size_t j = 0; j < g.kw; ++j) {
                const T* row = col + ((c * g.kh + i) * g.kw + j) * P;
                for (std::size_t oh = 0; oh < g.Ho; ++oh) {
                    const std::ptrdiff_t ih = std::ptrdiff_t(oh * g.sh + i) - std::ptrdiff_t(g.pad.top);
                    if (ih < 0 || ih >= std::ptrdiff_t(g.H)) continue;
                    T* dst = xc + ih * g.W;
                    for (std::size_t ow = 0; ow < g.Wo; ++ow) {
                        const std::ptrdiff_t iw = std::ptrdiff_t(ow * g.sw + j) - std::ptrdiff_t(g.pad.left);
                        if (iw >= 0 && iw < std::ptrdiff_t(g.W)) dst[iw] += row[oh * g.Wo + ow];
                    }
                }
            }
    }
}

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& w, Extent2 stride, Pad4 pad, std::size_t groups) {
    if (x.rank() != 3) throw ShapeError("conv input must be [C,H,W], got " + to_string(x.shape()));
    if (w.rank() != 4) throw ShapeError("conv weights must be [Cout,Cin/groups,kh,kw], got " + to_string(w.shape()));
    if (groups < 1 || x.dim(0) % groups != 0 || w.dim(0) % groups != 0 || w.dim(1) * groups != x.dim(0))
        throw ShapeError("conv input channels " + std::to_string(x.dim(0)) + " do not match weights " +
                         to_string(w.shape()) + " with " + std::to_string(groups) + " group(s)");
    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), w.dim(2), w.dim(3), stride.h, stride.w, 0, 0, pad};
    g.Ho = window_count(g.H, g.kh, g.sh, pad.top, pad.bottom);
    g.Wo = window_count(g.W, g.kw, g.sw, pad.left, pad.right);
    return g;
}

inline bool is_pointwise(const ConvGeometry& g) {
    return g.kh == 1 && g.kw == 1 && g.sh == 1 && g.sw == 1 && g.pad == Pad4{};
}

/// Cross-correlation (no kernel flip) with optional fused rectifier.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Extent2 stride, Pad4 pad,
                         std::size_t groups = 1, bool relu = false) {
    const auto g = conv_geometry(x, w, stride, pad, groups);
    const std::size_t Cout = w.dim(0), Cg = g.C / groups, Og = Cout / groups;
    const std::size_t K = Cg * g.kh * g.kw, P = g.Ho * g.Wo;
    if (b.size() != Cout) throw ShapeError("conv bias needs " + std::to_string(Cout) + " values");
    Tensor<T> y({Cout, g.Ho, g.Wo});
    AlignedVector<T> col;
    const bool direct = is_pointwise(g);
    if (!direct) col.resize(K * P);
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const T* src = x.data() + gi * Cg * g.H * g.W;
        if (!direct) {
            im2col(x.data(), g, gi * Cg, Cg, col.data());
            src = col.data();
        }
        ConstMatrixMap<T> wm(w.data() + gi * Og * K, Og, K);
        ConstMatrixMap<T> cm(src, K, P);
        MatrixMap<T> ym(y.data() + gi * Og * P, Og, P);
        ym.noalias() = wm * cm;
        for (std::size_t o = 0; o < Og; ++o) ym.row(o).array() += b[gi * Og + o];
    }
    if (relu)
        for (auto& v : y.values()) v = v > T(0) ? v : T(0);
    return y;
}

/// Accumulates weight/bias gradients into dw/db and returns the input gradient
/// (when wanted). dy must already include the rectifier mask.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Extent2 stride, Pad4 pad,
                     std::size_t groups, Tensor<T>* dx, Tensor<T>& dw, Tensor<T>& db) {
    const auto g = conv_geometry(x, w, stride, pad, groups);
    const std::size_t Cout = w.dim(0), Cg = g.C / groups, Og = Cout / groups;
    const std::size_t K = Cg * g.kh * g.kw, P = g.Ho * g.Wo;
    if (dy.shape() != Shape{Cout, g.Ho, g.Wo}) throw ShapeError("conv upstream gradient has wrong shape");
    if (dx) *dx = Tensor<T>(x.shape());
    const bool direct = is_pointwise(g);
    AlignedVector<T> col(direct ? 0 : K * P), dcol(K * P);
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const T* src = x.data() + gi * Cg * g.H * g.W;
        if (!direct) {
            im2col(x.data(), g, gi * Cg, Cg, col.data());
            src = col.data();
        }
        ConstMatrixMap<T> cm(src, K, P);
        ConstMatrixMap<T> dym(dy.data() + gi * Og * P, Og, P);
        MatrixMap<T> dwm(dw.data() + gi * Og * K, Og, K);
        dwm.noalias() += dym * cm.transpose();
        for (std::size_t o = 0; o < Og; ++o) db[gi * Og + o] += dym.row(o).sum();
        if (dx) {
            ConstMatrixMap<T> wm(w.data() + gi * Og * K, Og, K);
            if (direct) {
                MatrixMap<T> dxm(dx->data() + gi * Cg * P, K, P);
                dxm.noalias() = wm.transpose() * dym;
            } else {
                MatrixMap<T> dcm(dcol.data(), K, P);
                dcm.noalias() = wm.transpose() * dym;
                col2im(dcol.data(), g, gi * Cg, Cg, dx->data());
            }
        }
    }
}

/// Max or average pooling with explicit per-side padding. For max pooling the
/// winning input index of each output is written to argmax when given.
template <typename T>
Tensor<T> pool2d_forward(const Tensor<T>& x, LayerKind kind, Extent2 kernel, Extent2 stride, Pad4 pad,
                         std::vector<std::uint32_t>* argmax = nullptr) {
    if (x.rank() != 3) throw ShapeError("pool input must be [C,H,W], got " + to_string(x.shape()));
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t Ho = window_count(H, kernel.h, stride.h, pad.top, pad.bottom);
    const std::size_t Wo = window_count(W, kernel.w, stride.w, pad.left, pad.right);
    Tensor<T> y({C, Ho, Wo});
    if (argmax) argmax->assign(y.size(), 0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oh = 0; oh < Ho; ++oh) {
            const std::ptrdiff_t h0 = std::ptrdiff_t(oh * stride.h) - std::ptrdiff_t(pad.top);
            const std::size_t hb = std::size_t(std::max<std::ptrdiff_t>(h0, 0));
            const std::size_t he = std::size_t(std::min<std::ptrdiff_t>(h0 + std::ptrdiff_t(kernel.h), H));
            for (std::size_t ow = 0; ow < Wo; ++ow) {
                const std::ptrdiff_t w0 = std::ptrdiff_t(ow * stride.w) - std::ptrdiff_t(pad.left);
                const std::size_t wb = std::size_t(std::max<std::ptrdiff_t>(w0, 0));
                const std::size_t we = std::size_t(std::min<std::ptrdiff_t>(w0 + std::ptrdiff_t(kernel.w), W));
                if (hb >= he || wb >= we) throw ShapeError("pooling window lies entirely in padding");
                if (kind == LayerKind::maxpool) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t best_i = (c * H + hb) * W + wb;
                    for (std::size_t h = hb; h < he; ++h)
                        for (std::size_t w = wb; w < we; ++w) {
                            const std::size_t i = (c * H + h) * W + w;
                            if (x[i] > best) {
                                best = x[i];
                                best_i = i;
                            }
                        }
                    y(c, oh, ow) = best;
                    if (argmax) (*argmax)[(c * Ho + oh) * Wo + ow] = std::uint32_t(best_i);
                } else {
                    T sum = 0;
                    for (std::size_t h = hb; h < he; ++h)
                        for (std::size_t w = wb; w < we; ++w) sum += x(c, h, w);
                    y(c, oh, ow) = sum / T((he - hb) * (we - wb));
                }
            }
        }
    return y;
}

template <typename T>
Tensor<T> maxpool_backward(const Shape& x_shape, const Tensor<T>& dy, const std::vector<std::uint32_t>& argmax) {
    if (argmax.size() != dy.size()) throw UsageError("max-pool backward needs the argmax of its forward pass");
    Tensor<T> dx(x_shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
    return dx;
}

template <typename T>
Tensor<T> avgpool_backward(const Shape& x_shape, const Tensor<T>& dy, Extent2 kernel, Extent2 stride, Pad4 pad) {
    const std::size_t C = x_shape[0], H = x_shape[1], W = x_shape[2];
    const std::size_t Ho = dy.dim(1), Wo = dy.dim(2);
    Tensor<T> dx(x_shape);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oh = 0; oh < Ho; ++oh) {
            const std::ptrdiff_t h0 = std::ptrdiff_t(oh * stride.h) - std::ptrdiff_t(pad.top);
            const std::size_t hb = std::size_t(std::max<std::ptrdiff_t>(h0, 0));
            const std::size_t he = std::size_t(std::min<std::ptrdiff_t>(h0 + std::ptrdiff_t(kernel.h), H));
            for (std::size_t ow = 0; ow < Wo; ++ow) {
                const std::ptrdiff_t w0 = std::ptrdiff_t(ow * stride.w) - std::ptrdiff_t(pad.left);
                const std::size_t wb = std::size_t(std::max<std::ptrdiff_t>(w0, 0));
                const std::size_t we = std::size_t(std::min<std::ptrdiff_t>(w0 + std::ptrdiff_t(kernel.w), W));
                const T g = dy(c, oh, ow) / T((he - hb) * (we - wb));
                for (std::size_t h = hb; h < he; ++h)
                    for (std::size_t w = wb; w < we; ++w) dx(c, h, w) += g;
            }
        }
    return dx;
}

template <typename T>
Tensor<T> lrn_forward(const Tensor<T>& x, const LrnParams& p, Tensor<T>* scale_out = nullptr) {
    const std::size_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
    const std::ptrdiff_t half = std::ptrdiff_t(p.n / 2);
    const T a = T(p.alpha / double(p.n));
    Tensor<T> y(x.shape()), scale(x.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const std::size_t lo = std::size_t(std::max<std::ptrdiff_t>(0, std::ptrdiff_t(c) - half));
        const std::size_t hi = std::size_t(std::min<std::ptrdiff_t>(std::ptrdiff_t(C) - 1, std::ptrdiff_t(c) + half));
        for (std::size_t i = 0; i < HW; ++i) {
            T sq = 0;
            for (std::size_t k = lo; k <= hi; ++k) sq += x[k * HW + i] * x[k * HW + i];
            const T s = T(p.k) + a * sq;
            scale[c * HW + i] = s;
            y[c * HW + i] = x[c * HW + i] * std::pow(s, T(-p.beta));
        }
    }
    if (scale_out) *scale_out = std::move(scale);
    return y;
}

template <typename T>
Tensor<T> lrn_backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& scale, const Tensor<T>& dy,
                       const LrnParams& p) {
    const std::size_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
    const std::ptrdiff_t half = std::ptrdiff_t(p.n / 2);
    const T coeff = T(2.0 * p.alpha * p.beta / double(p.n));
    Tensor<T> dx(x.shape());
    for (std::size_t c = 0; c < C; ++c) {
        // channel c contributes to the scale of every channel whose window contains it
        const std::size_t lo = std::size_t(std::max<std::ptrdiff_t>(0, std::ptrdiff_t(c) - half));
        const std::size_t hi = std::size_t(std::min<std::ptrdiff_t>(std::ptrdiff_t(C) - 1, std::ptrdiff_t(c) + half));
        for (std::size_t i = 0; i < HW; ++i) {
            T acc = 0;
            for (std::size_t k = lo; k <= hi; ++k) acc += dy[k * HW + i] * y[k * HW + i] / scale[k * HW + i];
            dx[c * HW + i] = dy[c * HW + i] * std::pow(scale[c * HW + i], T(-p.beta)) - coeff * x[c * HW + i] * acc;
        }
    }
    return dx;
}

/// Softmax across channels at every spatial location.
template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& x) {
    const std::size_t C = x.dim(0), HW = x.size() / C;
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < HW; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, x[c * HW + i]);
        T sum = 0;
        for (std::size_t c = 0; c < C; ++c) sum += (y[c * HW + i] = std::exp(x[c * HW + i] - mx));
        for (std::size_t c = 0; c < C; ++c) y[c * HW + i] /= sum;
    }
    return y;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    const std::size_t C = y.dim(0), HW = y.size() / C;
    Tensor<T> dx(y.shape());
    for (std::size_t i = 0; i < HW; ++i) {
        T dot = 0;
        for (std::size_t c = 0; c < C; ++c) dot += dy[c * HW + i] * y[c * HW + i];
        for (std::size_t c = 0; c < C; ++c) dx[c * HW + i] = y[c * HW + i] * (dy[c * HW + i] - dot);
    }
    return dx;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T(0) ? v : T(0);
    return y;
}

/// Gradient through a rectifier given its output.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(y[i] > T(0))) dx[i] = T(0);
    return dx;
}

/// Inverted-dropout mask: each entry is 0 with probability rate, else 1/(1-rate).
template <typename T, typename Rng>
Tensor<T> dropout_mask(const Shape& shape, double rate, Rng& rng) {
    Tensor<T> mask(shape);
    std::bernoulli_distribution keep(1.0 - rate);
    const T scale = T(1.0 / (1.0 - rate));
    for (auto& m : mask.values()) m = keep(rng) ? scale : T(0);
    return mask;
}

template <typename T>
Tensor<T> multiply(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("elementwise product of mismatched tensors");
    Tensor<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

}  // namespace kernels
}  // namespace texturefuse
