#pragma once

// Binary tensor container shared by weight files and preprocessed caches.
//
// All integers are little-endian; all values are IEEE-754 binary32.
//
//   header   "TFWC" | u32 version | u32 block_count | f64 init_std | u64 init_seed
//   block    u32 kind_tag | u32 name_len | name bytes
//            | u32 weight_rank | u32 dims... | u32 bias_rank | u32 dims...
//            | f32 weights... | f32 biases...
//
// kind_tag 0 is a raw tensor (spectrogram, image); 1..7 are the layer kinds
// in LayerKind order. Parameter-free layers have rank-0 weight and bias.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "texturefuse/network.hpp"

namespace texturefuse {

inline constexpr std::uint32_t container_version = 1;
inline constexpr std::uint32_t raw_tensor_tag = 0;

inline std::uint32_t kind_tag(LayerKind k) { return std::uint32_t(k) + 1; }

struct ContainerBlock {
    std::uint32_t tag = raw_tensor_tag;
    std::string name;
    Tensor<float> weights;  // empty when the block carries no values
    Tensor<float> bias;
    friend bool operator==(const ContainerBlock&, const ContainerBlock&) = default;
};

struct Container {
    std::uint32_t version = container_version;
    double init_std = 0.0;
    std::uint64_t init_seed = 0;
    std::vector<ContainerBlock> blocks;
    friend bool operator==(const Container&, const Container&) = default;
};

namespace detail {

template <typename U>
void put(std::string& out, U value) {
    static_assert(std::is_trivially_copyable_v<U>);
    char bytes[sizeof(U)];
    std::memcpy(bytes, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
    out.append(bytes, sizeof(U));
}

class Reader {
   public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename U>
    U get(const std::string& what) {
        if (pos_ + sizeof(U) > bytes_.size()) throw FormatError("container truncated while reading " + what);
        char b[sizeof(U)];
        std::memcpy(b, bytes_.data() + pos_, sizeof(U));
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
        pos_ += sizeof(U);
        U v;
        std::memcpy(&v, b, sizeof(U));
        return v;
    }

    std::string get_string(std::size_t n, const std::string& what) {
        if (pos_ + n > bytes_.size()) throw FormatError("container truncated while reading " + what);
        std::string s(bytes_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

   private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

inline void put_shape(std::string& out, const Tensor<float>& t) {
    put<std::uint32_t>(out, std::uint32_t(t.rank()));
    for (auto d : t.shape()) put<std::uint32_t>(out, std::uint32_t(d));
}

inline Shape get_shape(Reader& r, const std::string& block) {
    const auto rank = r.get<std::uint32_t>("rank of " + block);
    if (rank > 8) throw FormatError("block '" + block + "': implausible rank " + std::to_string(rank));
    Shape s;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const auto d = r.get<std::uint32_t>("shape of " + block);
        if (d == 0) throw FormatError("block '" + block + "': zero extent in shape header");
        s.push_back(d);
    }
    return s;
}

inline Tensor<float> get_values(Reader& r, const Shape& shape, const std::string& block) {
    if (shape.empty()) return {};
    std::vector<float> v(element_count(shape));
    for (auto& x : v) x = r.get<float>("values of " + block);
    return Tensor<float>(shape, std::move(v));
}

}  // namespace detail

inline std::string encode(const Container& c) {
    std::string out = "TFWC";
    detail::put<std::uint32_t>(out, c.version);
    detail::put<std::uint32_t>(out, std::uint32_t(c.blocks.size()));
    detail::put<double>(out, c.init_std);
    detail::put<std::uint64_t>(out, c.init_seed);
    for (const auto& b : c.blocks) {
        detail::put<std::uint32_t>(out, b.tag);
        detail::put<std::uint32_t>(out, std::uint32_t(b.name.size()));
        out += b.name;
        detail::put_shape(out, b.weights);
        detail::put_shape(out, b.bias);
        for (float v : b.weights.values()) detail::put<float>(out, v);
        for (float v : b.bias.values()) detail::put<float>(out, v);
    }
    return out;
}

inline Container decode(std::string_view bytes) {
    if (bytes.substr(0, 4) != "TFWC") throw FormatError("not a tensor container (bad magic)");
    detail::Reader r(bytes.substr(4));
    Container c;
    c.version = r.get<std::uint32_t>("version");
    if (c.version != container_version)
        throw FormatError("unsupported container version " + std::to_string(c.version));
    const auto count = r.get<std::uint32_t>("block count");
    c.init_std = r.get<double>("init std");
    c.init_seed = r.get<std::uint64_t>("init seed");
    for (std::uint32_t i = 0; i < count; ++i) {
        ContainerBlock b;
        const std::string label = "block " + std::to_string(i);
        b.tag = r.get<std::uint32_t>("kind tag of " + label);
        if (b.tag > kind_tag(LayerKind::softmax)) throw FormatError(label + ": unknown kind tag " + std::to_string(b.tag));
        const auto len = r.get<std::uint32_t>("name length of " + label);
        b.name = r.get_string(len, "name of " + label);
        const std::string who = b.name.empty() ? label : b.name;
        const Shape ws = detail::get_shape(r, who);
        const Shape bs = detail::get_shape(r, who);
        b.weights = detail::get_values(r, ws, who);
        b.bias = detail::get_values(r, bs, who);
        c.blocks.push_back(std::move(b));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after last container block");
    return c;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

inline Container read_container(const std::filesystem::path& path) {
    try {
        return decode(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_container(const std::filesystem::path& path, const Container& c) {
    write_file_bytes(path, encode(c));
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t, const std::string& name = "tensor") {
    Container c;
    c.blocks.push_back({raw_tensor_tag, name, t.template cast<float>(), {}});
    write_container(path, c);
}

template <typename T = float>
Tensor<T> load_tensor(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.blocks.size() != 1 || c.blocks[0].tag != raw_tensor_tag || c.blocks[0].weights.empty())
        throw FormatError(path.string() + ": expected a single raw tensor block");
    return c.blocks[0].weights.template cast<T>();
}

/// One block per layer, parameters stored as binary32.
template <typename T>
Container to_container(const Network<T>& net) {
    Container c;
    c.init_std = net.init_std();
    c.init_seed = net.init_seed();
    const auto& spec = net.spec();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        ContainerBlock b{kind_tag(spec.layers[i].kind), spec.layers[i].name, {}, {}};
        if (net.has_parameters(i)) {
            b.weights = net.weight(i).template cast<float>();
            b.bias = net.bias(i).template cast<float>();
        }
        c.blocks.push_back(std::move(b));
    }
    return c;
}

/// Builds a network for spec from a container, checking every block against
/// the NetworkSpec. Any mismatch names the offending layer.
template <typename T>
Network<T> network_from_container(const NetworkSpec& spec, const Container& c) {
    if (c.blocks.size() != spec.layers.size())
        throw FormatError("weight file has " + std::to_string(c.blocks.size()) + " layers, network '" + spec.name +
                          "' has " + std::to_string(spec.layers.size()));
    Network<T> net(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        const auto& b = c.blocks[i];
        if (b.tag != kind_tag(l.kind) || b.name != l.name)
            throw FormatError("layer '" + l.name + "': weight file holds " + b.name + " instead");
        if (!net.has_parameters(i)) {
            if (!b.weights.empty() || !b.bias.empty())
                throw FormatError("layer '" + l.name + "': unexpected parameters in weight file");
            continue;
        }
        if (b.weights.shape() != net.weight(i).shape() || b.bias.shape() != net.bias(i).shape())
            throw FormatError("layer '" + l.name + "': weight file shape " + to_string(b.weights.shape()) +
                              " does not match " + to_string(net.weight(i).shape()));
        net.weight(i) = b.weights.template cast<T>();
        net.bias(i) = b.bias.template cast<T>();
    }
    net.set_init_metadata(c.init_seed, c.init_std);
    return net;
}

template <typename T>
void save_network(const std::filesystem::path& path, const Network<T>& net) {
    write_container(path, to_container(net));
}

template <typename T = float>
Network<T> load_network(const std::filesystem::path& path, const NetworkSpec& spec) {
    return network_from_container<T>(spec, read_container(path));
}

}  // namespace texturefuse
