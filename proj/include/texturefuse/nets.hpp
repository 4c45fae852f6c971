#pragma once

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "texturefuse/container.hpp"
#include "texturefuse/network.hpp"

namespace texturefuse {

inline constexpr std::size_t tum_class_count = 69;
inline constexpr std::size_t spectrogram_channels = 50;

struct BuildOptions {
    /// Desk-scale mode: every hidden channel width is divided by this factor.
    std::size_t width_divisor = 1;
    std::size_t class_count = tum_class_count;
    /// Two-group conv2/conv4/conv5 as in the original AlexNet release.
    bool grouped = false;
};

namespace detail {
inline std::size_t scaled(std::size_t width, const BuildOptions& o) {
    if (o.width_divisor < 1) throw RangeError("width divisor must be >= 1");
    return std::max<std::size_t>(1, width / o.width_divisor);
}
}  // namespace detail

/// Four conv/pool stages over a 1x50xT spectrogram, then FC1 = conv 4x12 -> 400,
/// FC2 = 1x1 -> 250, FC3 = 1x1 -> classes and a softmax. 15 layers.
inline NetworkSpec build_hapticnet(const BuildOptions& o = {}) {
    using L = LayerSpec;
    auto w = [&](std::size_t c) { return detail::scaled(c, o); };
    NetworkSpec s;
    s.name = "hapticnet";
    s.class_count = o.class_count;
    s.input_channels = 1;
    s.fixed_height = spectrogram_channels;
    s.nominal_input = Extent2{spectrogram_channels, 192};
    s.layers = {
        L::conv("conv1", w(50), {3, 3}, {1, 1}, {1, 1}),
        L::maxpool("pool1", {2, 2}, {2, 2}),
        L::local_response_norm("norm1"),
        L::conv("conv2", w(100), {3, 3}, {1, 1}, {1, 1}),
        L::maxpool("pool2", {2, 2}, {2, 2}),
        L::conv("conv3", w(150), {3, 3}, {1, 1}, {1, 1}),
        L::maxpool("pool3", {2, 2}, {2, 2}),
        L::conv("conv4", w(200), {3, 3}, {1, 1}, {1, 1}),
        L::maxpool("pool4", {2, 2}, {2, 2}),
        L::conv("fc1", w(400), {4, 12}),
        L::dropout("drop1"),
        L::conv("fc2", w(250), {1, 1}),
        L::dropout("drop2"),
        L::conv("fc3", o.class_count, {1, 1}, {1, 1}, {0, 0}, false),
        L::softmax("prob"),
    };
    s.validate();
    return s;
}

namespace detail {
inline std::vector<LayerSpec> alexnet_trunk(const BuildOptions& o, std::size_t conv_count) {
    using L = LayerSpec;
    auto w = [&](std::size_t c) { return scaled(c, o); };
    std::vector<LayerSpec> t = {
        L::conv("conv1", w(96), {11, 11}, {4, 4}),
        L::local_response_norm("norm1"),
        L::maxpool("pool1", {3, 3}, {2, 2}),
        L::conv("conv2", w(256), {5, 5}, {1, 1}, {2, 2}),
        L::local_response_norm("norm2"),
        L::maxpool("pool2", {3, 3}, {2, 2}),
        L::conv("conv3", w(384), {3, 3}, {1, 1}, {1, 1}),
    };
    if (conv_count > 3) {
        t.push_back(L::conv("conv4", w(384), {3, 3}, {1, 1}, {1, 1}));
        t.push_back(L::conv("conv5", w(256), {3, 3}, {1, 1}, {1, 1}));
        t.push_back(L::maxpool("pool5", {3, 3}, {2, 2}));
    }
    if (o.grouped)
        for (auto& l : t)
            if (l.name == "conv2" || l.name == "conv4" || l.name == "conv5") l.groups = 2;
    return t;
}

inline void append_head(NetworkSpec& s, const BuildOptions& o, Extent2 fc1_kernel) {
    using L = LayerSpec;
    s.layers.push_back(L::conv("fc1", scaled(300, o), fc1_kernel));
    s.layers.push_back(L::dropout("drop1"));
    s.layers.push_back(L::conv("fc2", scaled(250, o), {1, 1}));
    s.layers.push_back(L::dropout("drop2"));
    s.layers.push_back(L::conv("fc3", o.class_count, {1, 1}, {1, 1}, {0, 0}, false));
    s.layers.push_back(L::softmax("prob"));
}
}  // namespace detail

/// AlexNet convolutional trunk with the fully-connected head recast as
/// convolutions: FC1 = 6x6 -> 300, FC2 = 1x1 -> 250, FC3 = 1x1 -> classes.
inline NetworkSpec build_visualnet(const BuildOptions& o = {}) {
    NetworkSpec s;
    s.name = "visualnet";
    s.class_count = o.class_count;
    s.input_channels = 3;
    s.nominal_input = Extent2{224, 224};
    s.layers = detail::alexnet_trunk(o, 5);
    detail::append_head(s, o, {6, 6});
    s.validate();
    return s;
}

/// First three AlexNet convs, one average pool that reduces the 224x224 trunk
/// output to a single cell, then three 1x1 convs.
inline NetworkSpec build_visualnet_tcnn(const BuildOptions& o = {}) {
    NetworkSpec trunk;
    trunk.name = "visualnet-tcnn";
    trunk.input_channels = 3;
    trunk.layers = detail::alexnet_trunk(o, 3);
    const auto shapes = propagate_shapes(trunk, {3, 224, 224});
    const Extent2 remaining{shapes.back()[1], shapes.back()[2]};

    NetworkSpec s = trunk;
    s.class_count = o.class_count;
    s.nominal_input = Extent2{224, 224};
    s.layers.push_back(LayerSpec::avgpool("pool3", remaining, remaining));
    detail::append_head(s, o, {1, 1});
    s.validate();
    return s;
}

/// 1x1 conv over concatenated haptic and visual features, then softmax.
inline NetworkSpec build_fusion_head(std::size_t haptic_dim, std::size_t visual_dim,
                                     std::size_t class_count = tum_class_count) {
    if (haptic_dim == 0 || visual_dim == 0 || class_count == 0)
        throw RangeError("fusion head dimensions must be positive");
    NetworkSpec s;
    s.name = "fusion-head";
    s.class_count = class_count;
    s.input_channels = haptic_dim + visual_dim;
    s.nominal_input = Extent2{1, 1};
    s.layers = {LayerSpec::conv("fusion", class_count, {1, 1}, {1, 1}, {0, 0}, false), LayerSpec::softmax("prob")};
    s.validate();
    return s;
}

enum class NetKind { haptic, visual, visual_tcnn, fusion };

inline std::optional<NetKind> parse_net_kind(const std::string& s) {
    if (s == "haptic") return NetKind::haptic;
    if (s == "visual") return NetKind::visual;
    if (s == "visual-tcnn") return NetKind::visual_tcnn;
    if (s == "fusion") return NetKind::fusion;
    return std::nullopt;
}

inline const char* net_kind_name(NetKind k) {
    switch (k) {
        case NetKind::haptic: return "haptic";
        case NetKind::visual: return "visual";
        case NetKind::visual_tcnn: return "visual-tcnn";
        case NetKind::fusion: return "fusion";
    }
    return "?";
}

inline NetworkSpec build_network(NetKind kind, const BuildOptions& o = {}) {
    switch (kind) {
        case NetKind::haptic: return build_hapticnet(o);
        case NetKind::visual: return build_visualnet(o);
        case NetKind::visual_tcnn: return build_visualnet_tcnn(o);
        case NetKind::fusion: break;
    }
    throw RangeError("fusion networks are assembled from two unimodal networks and a head");
}

// ---------------------------------------------------------------------------
// Receptive-field arithmetic

struct ReceptiveFieldInfo {
    Extent2 rf;        // input span of one output location, padding included
    Extent2 jump;      // output-grid spacing in input units
    Extent2 min_input;       // single-window input (nominal size when the NetworkSpec declares one)
    Extent2 smallest_input;  // smallest input that still yields a 1x1 grid
};

/// Output extent along one axis, or nullopt when some layer no longer fits.
inline std::optional<std::size_t> axis_output_extent(const NetworkSpec& spec, bool height_axis, std::size_t n) {
    try {
        for (const auto& l : spec.layers) {
            if (!l.has_window()) continue;
            const bool ceil = l.kind != LayerKind::conv && l.ceil_mode;
            n = height_axis ? axis_geometry(n, l.kernel.h, l.stride.h, l.padding.h, ceil).out
                            : axis_geometry(n, l.kernel.w, l.stride.w, l.padding.w, ceil).out;
        }
        return n;
    } catch (const ShapeError&) {
        return std::nullopt;
    }
}

inline ReceptiveFieldInfo receptive_field(const NetworkSpec& spec) {
    ReceptiveFieldInfo info{{1, 1}, {1, 1}, {}, {}};
    for (const auto& l : spec.layers) {
        if (!l.has_window()) continue;
        info.rf.h += (l.kernel.h - 1) * info.jump.h;
        info.rf.w += (l.kernel.w - 1) * info.jump.w;
        info.jump.h *= l.stride.h;
        info.jump.w *= l.stride.w;
    }
    auto smallest = [&](bool height) {
        if (height && spec.fixed_height) return *spec.fixed_height;
        for (std::size_t n = 1; n <= 1u << 14; ++n)
            if (axis_output_extent(spec, height, n) == std::optional<std::size_t>(1)) return n;
        throw ShapeError("network '" + spec.name + "' never yields a single output location");
    };
    info.smallest_input = {smallest(true), smallest(false)};
    info.min_input = spec.nominal_input.value_or(info.smallest_input);

    if (output_grid(spec, info.min_input) != Extent2{1, 1})
        throw ShapeError("network '" + spec.name + "': declared single-window input does not yield a 1x1 grid");
    if (!spec.fixed_height && axis_output_extent(spec, true, info.min_input.h + info.jump.h) != 2u)
        throw ShapeError("network '" + spec.name + "': one extra jump does not add one output row");
    if (axis_output_extent(spec, false, info.min_input.w + info.jump.w) != 2u)
        throw ShapeError("network '" + spec.name + "': one extra jump does not add one output column");
    return info;
}

// ---------------------------------------------------------------------------
// Text description: one layer per line (name, kind, kernel, stride, pad, channels, flags)

inline std::string describe(const NetworkSpec& spec) {
    std::ostringstream os;
    os << "network " << spec.name << " classes=" << spec.class_count << " input_channels=" << spec.input_channels;
    if (spec.fixed_height) os << " fixed_height=" << *spec.fixed_height;
    if (spec.nominal_input) os << " nominal=" << spec.nominal_input->h << 'x' << spec.nominal_input->w;
    os << '\n';
    std::size_t channels = spec.input_channels;
    for (const auto& l : spec.layers) {
        channels = output_channels(l, channels);
        os << l.name << ' ' << kind_name(l.kind) << ' ' << l.kernel.h << 'x' << l.kernel.w << ' ' << l.stride.h << 'x'
           << l.stride.w << ' ' << l.padding.h << 'x' << l.padding.w << ' ' << channels;
        if (l.relu) os << " relu";
        if (l.groups != 1) os << " groups=" << l.groups;
        if (l.kind == LayerKind::dropout) os << " rate=" << l.dropout_rate;
        if (l.kind == LayerKind::lrn)
            os << " lrn=" << l.lrn.n << ',' << l.lrn.alpha << ',' << l.lrn.beta << ',' << l.lrn.k;
        if ((l.kind == LayerKind::maxpool || l.kind == LayerKind::avgpool) && !l.ceil_mode) os << " floor";
        os << '\n';
    }
    return os.str();
}

inline NetworkSpec parse_description(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    NetworkSpec spec;
    auto pair = [](const std::string& s) {
        const auto x = s.find('x');
        if (x == std::string::npos) throw FormatError("expected HxW, got '" + s + "'");
        return Extent2{std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
    };
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        try {
            if (!header) {
                if (tok.size() < 2 || tok[0] != "network") throw FormatError("missing 'network' header line");
                spec.name = tok[1];
                for (std::size_t i = 2; i < tok.size(); ++i) {
                    const auto eq = tok[i].find('=');
                    const auto key = tok[i].substr(0, eq), val = tok[i].substr(eq + 1);
                    if (key == "classes") spec.class_count = std::stoul(val);
                    else if (key == "input_channels") spec.input_channels = std::stoul(val);
                    else if (key == "fixed_height") spec.fixed_height = std::stoul(val);
                    else if (key == "nominal") spec.nominal_input = pair(val);
                }
                header = true;
                continue;
            }
            if (tok.size() < 6) throw FormatError("layer line needs 6 columns: '" + line + "'");
            LayerSpec l;
            l.name = tok[0];
            const auto kind = parse_kind(tok[1]);
            if (!kind) throw FormatError("unknown layer kind '" + tok[1] + "'");
            l.kind = *kind;
            l.kernel = pair(tok[2]);
            l.stride = pair(tok[3]);
            l.padding = pair(tok[4]);
            if (l.kind == LayerKind::conv) l.out_channels = std::stoul(tok[5]);
            for (std::size_t i = 6; i < tok.size(); ++i) {
                const auto& t = tok[i];
                if (t == "relu") l.relu = true;
                else if (t == "floor") l.ceil_mode = false;
                else if (t.rfind("groups=", 0) == 0) l.groups = std::stoul(t.substr(7));
                else if (t.rfind("rate=", 0) == 0) l.dropout_rate = std::stod(t.substr(5));
                else if (t.rfind("lrn=", 0) == 0) {
                    std::istringstream ps(t.substr(4));
                    char comma;
                    ps >> l.lrn.n >> comma >> l.lrn.alpha >> comma >> l.lrn.beta >> comma >> l.lrn.k;
                } else throw FormatError("unknown layer flag '" + t + "'");
            }
            spec.layers.push_back(l);
        } catch (const std::logic_error&) {
            throw FormatError("malformed network description line: '" + line + "'");
        }
    }
    if (!header) throw FormatError("empty network description");
    spec.validate(false);
    return spec;
}

// ---------------------------------------------------------------------------
// Pretrained trunk import

/// Index of the first head layer (FC1); everything before it is the trunk.
inline std::size_t trunk_end(const NetworkSpec& spec) { return spec.layer_index("fc1"); }

struct TrunkImportOptions {
    /// Accept two-group weight blocks and switch those layers to grouped mode.
    bool allow_grouped = true;
};

template <typename T>
struct TrunkImport {
    Network<T> net;
    bool imported = false;
    std::vector<std::string> layers;  // trunk layers that received weights
};

/// Replaces the trunk conv weights of net with the blocks of a container file
/// (matched by layer name). Head layers keep their current parameters. A missing
/// file leaves the network untouched (imported = false); a malformed or
/// mismatching file throws naming the layer and nothing is modified.
template <typename T>
TrunkImport<T> import_alexnet_conv_weights(const Network<T>& net, const std::filesystem::path& weight_file,
                                           const TrunkImportOptions& opt = {}) {
    if (!std::filesystem::exists(weight_file)) return {net, false, {}};
    const Container c = read_container(weight_file);
    NetworkSpec spec = net.spec();
    const std::size_t end = trunk_end(spec);

    // shapes first, so a bad block leaves nothing half-applied
    std::vector<std::pair<std::size_t, const ContainerBlock*>> plan;
    std::size_t channels = spec.input_channels;
    for (std::size_t i = 0; i < end; ++i) {
        auto& l = spec.layers[i];
        if (l.kind == LayerKind::conv) {
            const ContainerBlock* found = nullptr;
            for (const auto& b : c.blocks)
                if (b.name == l.name) found = &b;
            if (!found) throw FormatError("layer '" + l.name + "': missing from " + weight_file.string());
            if (found->tag != kind_tag(LayerKind::conv) || found->weights.rank() != 4)
                throw FormatError("layer '" + l.name + "': block is not a conv weight tensor");
            const auto& ws = found->weights.shape();
            if (ws[0] != l.out_channels || ws[2] != l.kernel.h || ws[3] != l.kernel.w || ws[1] == 0 ||
                channels % ws[1] != 0)
                throw FormatError("layer '" + l.name + "': weight shape " + to_string(ws) + " does not fit " +
                                  std::to_string(l.out_channels) + " outputs over " + std::to_string(channels) +
                                  " inputs with a " + std::to_string(l.kernel.h) + "x" + std::to_string(l.kernel.w) +
                                  " kernel");
            const std::size_t groups = channels / ws[1];
            if (groups != l.groups) {
                if (!opt.allow_grouped || groups != 2 || l.out_channels % groups != 0)
                    throw FormatError("layer '" + l.name + "': weight grouping " + std::to_string(groups) +
                                      " does not match network grouping " + std::to_string(l.groups));
                l.groups = groups;
            }
            if (found->bias.shape() != Shape{l.out_channels})
                throw FormatError("layer '" + l.name + "': bias shape " + to_string(found->bias.shape()) +
                                  " does not match " + std::to_string(l.out_channels) + " outputs");
            plan.emplace_back(i, found);
        }
        channels = output_channels(l, channels);
    }

    Network<T> out(spec);
    for (std::size_t p = 0; p < net.parameters().size(); ++p) {
        const std::size_t layer = net.layer_of_parameter(p);
        if (layer >= end) out.parameters()[p] = net.parameters()[p];
    }
    TrunkImport<T> result{std::move(out), true, {}};
    for (const auto& [i, b] : plan) {
        result.net.weight(i) = b->weights.template cast<T>();
        result.net.bias(i) = b->bias.template cast<T>();
        result.layers.push_back(spec.layers[i].name);
    }
    result.net.set_init_metadata(net.init_seed(), net.init_std());
    return result;
}

/// Container holding only the trunk conv layers, in network order.
template <typename T>
Container export_trunk(const Network<T>& net) {
    Container all = to_container(net);
    Container c;
    c.init_std = all.init_std;
    c.init_seed = all.init_seed;
    const std::size_t end = trunk_end(net.spec());
    for (std::size_t i = 0; i < end; ++i)
        if (net.has_parameters(i)) c.blocks.push_back(all.blocks[i]);
    return c;
}

}  // namespace texturefuse
