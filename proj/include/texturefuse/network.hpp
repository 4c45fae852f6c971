#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "texturefuse/layers.hpp"
#include "texturefuse/tensor.hpp"

namespace texturefuse {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// Ordered layer list describing a fully-convolutional network. There is no
/// fully-connected layer kind: classifier heads are 1x1 (or full-map) convs.
struct NetworkSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    std::size_t class_count = 0;
    std::size_t input_channels = 1;
    /// Set when the height axis is not slid over (haptic: the 50 frequency channels).
    std::optional<std::size_t> fixed_height;
    /// Input extents of the equivalent fixed-input CNN (one output location).
    std::optional<Extent2> nominal_input;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;

    std::size_t layer_index(const std::string& layer_name) const {
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].name == layer_name) return i;
        throw RangeError("network '" + name + "' has no layer named '" + layer_name + "'");
    }

    /// Checks every layer; with classifier=true also requires the
    /// "1x1 conv to class_count, then softmax" ending.
    void validate(bool classifier = true) const {
        if (layers.empty()) throw RangeError("network '" + name + "' has no layers");
        if (input_channels < 1) throw RangeError("network '" + name + "' needs >= 1 input channel");
        std::size_t channels = input_channels;
        for (const auto& l : layers) {
            l.validate();
            if (l.kind == LayerKind::conv && channels % l.groups != 0)
                throw ShapeError("layer '" + l.name + "': " + std::to_string(channels) +
                                 " input channels do not split into " + std::to_string(l.groups) + " groups");
            channels = output_channels(l, channels);
        }
        if (!classifier) return;
        const auto n = layers.size();
        if (n < 2 || layers[n - 1].kind != LayerKind::softmax || layers[n - 2].kind != LayerKind::conv ||
            layers[n - 2].kernel != Extent2{1, 1} || layers[n - 2].out_channels != class_count)
            throw RangeError("network '" + name + "' must end with a 1x1 conv to " + std::to_string(class_count) +
                             " classes followed by softmax");
    }
};

/// Shapes of the input and of every layer output for a [C,H,W] input.
inline std::vector<Shape> propagate_shapes(const NetworkSpec& spec, const Shape& input) {
    if (input.size() != 3) throw ShapeError("network input must be [C,H,W], got " + to_string(input));
    if (input[0] != spec.input_channels)
        throw ShapeError("network '" + spec.name + "' expects " + std::to_string(spec.input_channels) +
                         " input channel(s), got " + std::to_string(input[0]));
    if (spec.fixed_height && input[1] != *spec.fixed_height)
        throw ShapeError("network '" + spec.name + "' expects input height " + std::to_string(*spec.fixed_height) +
                         ", got " + std::to_string(input[1]));
    std::vector<Shape> shapes{input};
    Shape cur = input;
    for (const auto& l : spec.layers) {
        const auto g = layer_geometry(l, {cur[1], cur[2]});
        cur = {output_channels(l, cur[0]), g.out.h, g.out.w};
        shapes.push_back(cur);
    }
    return shapes;
}

inline Extent2 output_grid(const NetworkSpec& spec, Extent2 input) {
    const auto shapes = propagate_shapes(spec, {spec.input_channels, input.h, input.w});
    return {shapes.back()[1], shapes.back()[2]};
}

/// Everything a backward pass needs from a forward pass.
template <typename T>
struct ForwardTrace {
    std::vector<Tensor<T>> activations;  // [0] = input, [i+1] = output of layer i
    std::vector<std::vector<std::uint32_t>> argmax;
    std::vector<Tensor<T>> aux;  // LRN scale or dropout mask, per layer
    std::size_t end = 0;         // layers [0, end) were run

    bool recorded() const { return !activations.empty(); }
    const Tensor<T>& output() const { return activations.back(); }
};

template <typename T>
using Gradients = std::vector<Tensor<T>>;

/// A NetworkSpec together with its parameters (weight and bias per conv layer).
template <typename T>
class Network {
   public:
    Network() = default;

    explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
        spec_.validate(false);
        std::size_t channels = spec_.input_channels;
        layer_param_.assign(spec_.layers.size(), npos);
        for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
            const auto& l = spec_.layers[i];
            if (l.kind == LayerKind::conv) {
                layer_param_[i] = params_.size();
                params_.emplace_back(Shape{l.out_channels, channels / l.groups, l.kernel.h, l.kernel.w});
                params_.emplace_back(Shape{l.out_channels});
            }
            channels = output_channels(l, channels);
        }
    }

    /// Zero-mean Gaussian weights with the given deviation, zero biases.
    static Network random(NetworkSpec spec, std::uint64_t seed, double stddev = 0.01) {
        Network net(std::move(spec));
        net.reinitialize(seed, stddev);
        return net;
    }

    void reinitialize(std::uint64_t seed, double stddev = 0.01) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, stddev);
        for (std::size_t p = 0; p < params_.size(); p += 2) {
            for (auto& v : params_[p].values()) v = T(gauss(rng));
            params_[p + 1].fill(T(0));
        }
        init_seed_ = seed;
        init_std_ = stddev;
    }

    /// Re-draws only the parameters of layers [first, last).
    void reinitialize_layers(std::size_t first, std::size_t last, std::uint64_t seed, double stddev = 0.01) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, stddev);
        for (std::size_t i = first; i < last && i < layer_param_.size(); ++i) {
            if (layer_param_[i] == npos) continue;
            for (auto& v : params_[layer_param_[i]].values()) v = T(gauss(rng));
            params_[layer_param_[i] + 1].fill(T(0));
        }
    }

    const NetworkSpec& spec() const { return spec_; }
    std::vector<Tensor<T>>& parameters() { return params_; }
    const std::vector<Tensor<T>>& parameters() const { return params_; }

    bool has_parameters(std::size_t layer) const { return layer_param_.at(layer) != npos; }
    /// Index of the layer's weight tensor in parameters(); the bias follows it.
    std::size_t parameter_index(std::size_t layer) const { return layer_param_.at(layer); }
    std::size_t layer_of_parameter(std::size_t param) const {
        for (std::size_t i = 0; i < layer_param_.size(); ++i)
            if (layer_param_[i] == param || layer_param_[i] + 1 == param) return i;
        throw RangeError("no parameter with index " + std::to_string(param));
    }
    const Tensor<T>& weight(std::size_t layer) const { return params_[checked_param(layer)]; }
    const Tensor<T>& bias(std::size_t layer) const { return params_[checked_param(layer) + 1]; }
    Tensor<T>& weight(std::size_t layer) { return params_[checked_param(layer)]; }
    Tensor<T>& bias(std::size_t layer) { return params_[checked_param(layer) + 1]; }

    std::uint64_t init_seed() const { return init_seed_; }
    double init_std() const { return init_std_; }
    void set_init_metadata(std::uint64_t seed, double stddev) {
        init_seed_ = seed;
        init_std_ = stddev;
    }

    Gradients<T> zero_gradients() const {
        Gradients<T> g;
        for (const auto& p : params_) g.emplace_back(p.shape());
        return g;
    }

    /// Inference pass through layers [begin, end). Dropout is the identity here.
    Tensor<T> forward(const Tensor<T>& x, std::size_t end = npos, std::size_t begin = 0) const {
        end = std::min(end, spec_.layers.size());
        Tensor<T> cur = x;
        for (std::size_t i = begin; i < end; ++i) {
            const auto g = layer_geometry(spec_.layers[i], {cur.dim(1), cur.dim(2)});
            cur = apply_layer(i, cur, g.pad);
        }
        return cur;
    }

    /// Inference application of a single layer with caller-chosen padding.
    Tensor<T> apply_layer(std::size_t i, const Tensor<T>& x, const Pad4& pad) const {
        const auto& l = spec_.layers[i];
        switch (l.kind) {
            case LayerKind::conv:
                return kernels::conv2d_forward(x, weight(i), bias(i), l.stride, pad, l.groups, l.relu);
            case LayerKind::maxpool:
            case LayerKind::avgpool:
                return kernels::pool2d_forward(x, l.kind, l.kernel, l.stride, pad);
            case LayerKind::lrn:
                return kernels::lrn_forward(x, l.lrn);
            case LayerKind::relu:
                return kernels::relu_forward(x);
            case LayerKind::dropout:
                return x;
            case LayerKind::softmax:
                return kernels::softmax_forward(x);
        }
        return x;
    }

    /// Forward pass that records what backward() needs. With training=false
    /// dropout is the identity (used for gradient checks).
    template <typename Rng>
    ForwardTrace<T> forward_train(const Tensor<T>& x, Rng& rng, std::size_t end = npos, bool training = true) const {
        end = std::min(end, spec_.layers.size());
        ForwardTrace<T> tr;
        tr.end = end;
        tr.activations.reserve(end + 1);
        tr.activations.push_back(x);
        tr.argmax.resize(end);
        tr.aux.resize(end);
        for (std::size_t i = 0; i < end; ++i) {
            const auto& l = spec_.layers[i];
            const Tensor<T>& in = tr.activations.back();
            const auto g = layer_geometry(l, {in.dim(1), in.dim(2)});
            Tensor<T> out;
            switch (l.kind) {
                case LayerKind::maxpool:
                    out = kernels::pool2d_forward(in, l.kind, l.kernel, l.stride, g.pad, &tr.argmax[i]);
                    break;
                case LayerKind::lrn:
                    out = kernels::lrn_forward(in, l.lrn, &tr.aux[i]);
                    break;
                case LayerKind::dropout:
                    if (training && l.dropout_rate > 0.0) {
                        tr.aux[i] = kernels::dropout_mask<T>(in.shape(), l.dropout_rate, rng);
                        out = kernels::multiply(in, tr.aux[i]);
                    } else {
                        out = in;
                    }
                    break;
                default:
                    out = apply_layer(i, in, g.pad);
            }
            tr.activations.push_back(std::move(out));
        }
        return tr;
    }

    /// Back-propagates grad (taken w.r.t. activations[from]) down to the input.
    /// Parameter gradients are accumulated into grads; the input gradient is returned.
    Tensor<T> backward(const ForwardTrace<T>& tr, const Tensor<T>& grad, Gradients<T>& grads,
                       std::size_t from = npos, bool need_input_grad = true) const {
        if (!tr.recorded()) throw UsageError("backward called without a recorded forward pass");
        if (from == npos) from = tr.end;
        if (from > tr.end) throw UsageError("backward start lies beyond the recorded forward pass");
        if (grad.shape() != tr.activations[from].shape())
            throw ShapeError("upstream gradient " + to_string(grad.shape()) + " does not match activation " +
                             to_string(tr.activations[from].shape()));
        if (grads.size() != params_.size()) throw UsageError("gradient buffer does not match the network");
        Tensor<T> g = grad;
        for (std::size_t i = from; i-- > 0;) {
            const auto& l = spec_.layers[i];
            const Tensor<T>& in = tr.activations[i];
            const Tensor<T>& out = tr.activations[i + 1];
            const bool want_dx = need_input_grad || i > 0;
            switch (l.kind) {
                case LayerKind::conv: {
                    const auto geo = layer_geometry(l, {in.dim(1), in.dim(2)});
                    if (l.relu) g = kernels::relu_backward(out, g);
                    const std::size_t p = layer_param_[i];
                    Tensor<T> dx;
                    kernels::conv2d_backward(in, params_[p], g, l.stride, geo.pad, l.groups, want_dx ? &dx : nullptr,
                                             grads[p], grads[p + 1]);
                    if (!want_dx) return {};
                    g = std::move(dx);
                    break;
                }
                case LayerKind::maxpool:
                    g = kernels::maxpool_backward(in.shape(), g, tr.argmax[i]);
                    break;
                case LayerKind::avgpool: {
                    const auto geo = layer_geometry(l, {in.dim(1), in.dim(2)});
                    g = kernels::avgpool_backward(in.shape(), g, l.kernel, l.stride, geo.pad);
                    break;
                }
                case LayerKind::lrn:
                    g = kernels::lrn_backward(in, out, tr.aux[i], g, l.lrn);
                    break;
                case LayerKind::relu:
                    g = kernels::relu_backward(out, g);
                    break;
                case LayerKind::dropout:
                    if (!tr.aux[i].empty()) g = kernels::multiply(g, tr.aux[i]);
                    break;
                case LayerKind::softmax:
                    g = kernels::softmax_backward(out, g);
                    break;
            }
        }
        return g;
    }

    template <typename U>
    Network<U> cast() const {
        Network<U> out(spec_);
        for (std::size_t i = 0; i < params_.size(); ++i) out.parameters()[i] = params_[i].template cast<U>();
        out.set_init_metadata(init_seed_, init_std_);
        return out;
    }

   private:
    std::size_t checked_param(std::size_t layer) const {
        if (layer >= layer_param_.size() || layer_param_[layer] == npos)
            throw RangeError("layer " + std::to_string(layer) + " of '" + spec_.name + "' has no parameters");
        return layer_param_[layer];
    }

    NetworkSpec spec_;
    std::vector<Tensor<T>> params_;
    std::vector<std::size_t> layer_param_;
    std::uint64_t init_seed_ = 0;
    double init_std_ = 0.01;
};

template <typename T>
struct LossResult {
    T loss = 0;
    Tensor<T> grad_logits;  // d(loss)/d(logits)
};

/// Cross-entropy of a per-location softmax against one shared target class,
/// averaged over all output locations. Computed from the logits for stability.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t target) {
    const std::size_t C = logits.dim(0), L = logits.size() / C;
    if (target >= C) throw RangeError("target class " + std::to_string(target) + " out of range");
    const Tensor<T> p = kernels::softmax_forward(logits);
    LossResult<T> r{0, Tensor<T>(logits.shape())};
    for (std::size_t i = 0; i < L; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, logits[c * L + i]);
        T sum = 0;
        for (std::size_t c = 0; c < C; ++c) sum += std::exp(logits[c * L + i] - mx);
        r.loss += std::log(sum) + mx - logits[target * L + i];
        for (std::size_t c = 0; c < C; ++c)
            r.grad_logits[c * L + i] = (p[c * L + i] - (c == target ? T(1) : T(0))) / T(L);
    }
    r.loss /= T(L);
    return r;
}

}  // namespace texturefuse
