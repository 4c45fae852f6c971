#pragma once

// Sliding-window counterpart of a fully-convolutional network.
//
// Every output location of the FCN is recomputed from scratch on its own crop
// of the input: the crop is the location's dependency cone (the receptive
// field, clipped to the input), and each layer is run only over the part of
// its input that the location depends on. Padding is applied exactly where the
// cone meets the true input border, so the crop network reproduces the dense
// result, while nothing is shared between neighbouring windows. The oracle
// borrows the FCN's parameter storage.

#include <cstddef>
#include <vector>

#include "texturefuse/nets.hpp"
#include "texturefuse/network.hpp"

namespace texturefuse {

/// Half-open index range along one axis.
struct AxisRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

struct SlidingWindow {
    Extent2 location;        // output-grid coordinates
    Extent2 nominal_origin;  // location * jump: origin of the fixed-size CNN window
    AxisRange rows, cols;    // input crop (dependency cone clipped to the input)
};

template <typename T>
class SlidingWindowOracle {
   public:
    explicit SlidingWindowOracle(const Network<T>& net, std::size_t end = npos)
        : net_(&net), end_(std::min(end, net.spec().layers.size())) {
        for (const auto& l : net.spec().layers)
            if (l.has_window()) {
                jump_.h *= l.stride.h;
                jump_.w *= l.stride.w;
            }
    }

    const Network<T>& network() const { return *net_; }
    Extent2 jump() const { return jump_; }

    /// One window per output location of the dense network on an input of this size.
    std::vector<SlidingWindow> windows(Extent2 input) const {
        const Plan plan = make_plan(input);
        std::vector<SlidingWindow> out;
        for (std::size_t i = 0; i < plan.grid.h; ++i)
            for (std::size_t j = 0; j < plan.grid.w; ++j) {
                const auto rows = cone(plan, true, i), cols = cone(plan, false, j);
                out.push_back({{i, j},
                               {i * jump_.h, j * jump_.w},
                               {rows.front().clipped_begin, rows.front().clipped_end},
                               {cols.front().clipped_begin, cols.front().clipped_end}});
            }
        return out;
    }

    /// Output vector of one location, computed from that location's crop only.
    Tensor<T> evaluate(const Tensor<T>& x, Extent2 location) const {
        const Plan plan = make_plan({x.dim(1), x.dim(2)});
        if (location.h >= plan.grid.h || location.w >= plan.grid.w)
            throw RangeError("window location outside the output grid");
        return evaluate(x, plan, location);
    }

    /// Dense prediction assembled window by window.
    Tensor<T> predict(const Tensor<T>& x) const {
        const Plan plan = make_plan({x.dim(1), x.dim(2)});
        const std::size_t C = plan.shapes.back()[0];
        Tensor<T> out({C, plan.grid.h, plan.grid.w});
        for (std::size_t i = 0; i < plan.grid.h; ++i)
            for (std::size_t j = 0; j < plan.grid.w; ++j) {
                const Tensor<T> v = evaluate(x, plan, {i, j});
                for (std::size_t c = 0; c < C; ++c) out(c, i, j) = v[c];
            }
        return out;
    }

   private:
    struct Plan {
        std::vector<Shape> shapes;  // input and outputs of layers [0, end)
        std::vector<LayerGeometry> geometry;
        Extent2 grid;
    };

    // Per-layer input span needed by one output location. raw_* may extend into
    // padding (negative or past the end); clipped_* is the part that exists.
    struct Span {
        std::ptrdiff_t raw_begin, raw_end;
        std::size_t clipped_begin, clipped_end;
        std::size_t size_clipped() const { return clipped_end - clipped_begin; }
    };

    Plan make_plan(Extent2 input) const {
        const auto& spec = net_->spec();
        Plan p;
        auto all = propagate_shapes(spec, {spec.input_channels, input.h, input.w});
        p.shapes.assign(all.begin(), all.begin() + std::ptrdiff_t(end_) + 1);
        for (std::size_t i = 0; i < end_; ++i)
            p.geometry.push_back(layer_geometry(spec.layers[i], {p.shapes[i][1], p.shapes[i][2]}));
        p.grid = {p.shapes.back()[1], p.shapes.back()[2]};
        return p;
    }

    // spans[i] is the input span of layer i; computed back from the output index.
    std::vector<Span> cone(const Plan& plan, bool height, std::size_t index) const {
        const auto& layers = net_->spec().layers;
        std::vector<Span> spans(end_);
        std::size_t a = index, b = index + 1;  // clipped output range of the current layer
        for (std::size_t i = end_; i-- > 0;) {
            const auto& l = layers[i];
            const std::ptrdiff_t n = std::ptrdiff_t(plan.shapes[i][height ? 1 : 2]);
            std::ptrdiff_t lo = std::ptrdiff_t(a), hi = std::ptrdiff_t(b);
            if (l.has_window()) {
                const std::ptrdiff_t k = std::ptrdiff_t(height ? l.kernel.h : l.kernel.w);
                const std::ptrdiff_t s = std::ptrdiff_t(height ? l.stride.h : l.stride.w);
                const std::ptrdiff_t pb =
                    std::ptrdiff_t(height ? plan.geometry[i].pad.top : plan.geometry[i].pad.left);
                lo = std::ptrdiff_t(a) * s - pb;
                hi = (std::ptrdiff_t(b) - 1) * s - pb + k;
            }
            spans[i] = {lo, hi, std::size_t(std::max<std::ptrdiff_t>(lo, 0)), std::size_t(std::min(hi, n))};
            a = spans[i].clipped_begin;
            b = spans[i].clipped_end;
        }
        return spans;
    }

    Tensor<T> evaluate(const Tensor<T>& x, const Plan& plan, Extent2 location) const {
        const auto rows = cone(plan, true, location.h);
        const auto cols = cone(plan, false, location.w);
        Tensor<T> cur = crop(x, rows[0].clipped_begin, rows[0].size_clipped(), cols[0].clipped_begin,
                             cols[0].size_clipped());
        for (std::size_t i = 0; i < end_; ++i) {
            const Pad4 pad{before(rows[i]), after(rows[i]), before(cols[i]), after(cols[i])};
            cur = net_->apply_layer(i, cur, pad);
        }
        if (cur.dim(1) != 1 || cur.dim(2) != 1)
            throw ShapeError("sliding window produced a " + std::to_string(cur.dim(1)) + "x" +
                             std::to_string(cur.dim(2)) + " map instead of one location");
        return cur;
    }

    static std::size_t before(const Span& s) { return std::size_t(std::max<std::ptrdiff_t>(0, -s.raw_begin)); }
    static std::size_t after(const Span& s) {
        return std::size_t(std::max<std::ptrdiff_t>(0, s.raw_end - std::ptrdiff_t(s.clipped_end)));
    }

    const Network<T>* net_;
    std::size_t end_;
    Extent2 jump_{1, 1};
};

/// Sliding-window evaluator sharing the FCN's weights.
template <typename T>
SlidingWindowOracle<T> fcn_to_sliding_cnn(const Network<T>& net) {
    return SlidingWindowOracle<T>(net);
}

}  // namespace texturefuse
