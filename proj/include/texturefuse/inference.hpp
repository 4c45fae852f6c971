#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "texturefuse/nets.hpp"
#include "texturefuse/network.hpp"

namespace texturefuse {

/// Per-location class labels of a [classes, Gh, Gw] probability grid, in
/// row-major location order. Ties go to the lowest class index.
template <typename T>
std::vector<std::size_t> argmax_labels(const Tensor<T>& probs) {
    if (probs.rank() != 3) throw ShapeError("prediction grid must be [classes,Gh,Gw], got " + to_string(probs.shape()));
    const std::size_t C = probs.dim(0), L = probs.dim(1) * probs.dim(2);
    std::vector<std::size_t> labels(L, 0);
    for (std::size_t i = 0; i < L; ++i) {
        T best = probs[i];
        for (std::size_t c = 1; c < C; ++c)
            if (probs[c * L + i] > best) {
                best = probs[c * L + i];
                labels[i] = c;
            }
    }
    return labels;
}

struct VoteResult {
    std::size_t label = 0;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> fragment_labels;
};

/// Majority vote over per-location labels; ties go to the lowest class index.
inline VoteResult max_vote(std::span<const std::size_t> labels, std::size_t class_count) {
    if (labels.empty()) throw RangeError("max-vote needs at least one label");
    VoteResult r;
    r.counts.assign(class_count, 0);
    for (auto c : labels) {
        if (c >= class_count) throw RangeError("label " + std::to_string(c) + " outside " + std::to_string(class_count) + " classes");
        ++r.counts[c];
    }
    for (std::size_t c = 1; c < class_count; ++c)
        if (r.counts[c] > r.counts[r.label]) r.label = c;
    r.fragment_labels.assign(labels.begin(), labels.end());
    return r;
}

template <typename T>
VoteResult vote_grid(const Tensor<T>& probs) {
    const auto labels = argmax_labels(probs);
    return max_vote(labels, probs.dim(0));
}

/// Dense prediction on a [1,50,T] spectrogram followed by argmax and vote.
template <typename T>
VoteResult classify_haptic(const Network<T>& net, const Tensor<T>& spectrogram) {
    const auto rf = receptive_field(net.spec());
    if (spectrogram.rank() != 3 || spectrogram.dim(2) < rf.min_input.w)
        throw RangeError("haptic input needs at least " + std::to_string(rf.min_input.w) + " frames, got " +
                         (spectrogram.rank() == 3 ? std::to_string(spectrogram.dim(2)) : to_string(spectrogram.shape())));
    return vote_grid(net.forward(spectrogram));
}

template <typename T>
VoteResult classify_image(const Network<T>& net, const Tensor<T>& image) {
    const auto rf = receptive_field(net.spec());
    if (image.rank() != 3 || image.dim(1) < rf.min_input.h || image.dim(2) < rf.min_input.w)
        throw RangeError("image input needs at least " + std::to_string(rf.min_input.h) + "x" +
                         std::to_string(rf.min_input.w) + " pixels, got " + to_string(image.shape()));
    return vote_grid(net.forward(image));
}

// ---------------------------------------------------------------------------
// Feature-level fusion

enum class FusionLayer { fc2, fc3 };
/// Which side of the named layer the features are read from.
enum class FeatureSource { outputs, inputs };

inline const char* fusion_layer_name(FusionLayer l) { return l == FusionLayer::fc2 ? "fc2" : "fc3"; }

inline FusionLayer parse_fusion_layer(const std::string& s) {
    if (s == "fc2") return FusionLayer::fc2;
    if (s == "fc3") return FusionLayer::fc3;
    throw RangeError("fusion layer must be fc2 or fc3, got '" + s + "'");
}

inline FeatureSource parse_feature_source(const std::string& s) {
    if (s == "outputs") return FeatureSource::outputs;
    if (s == "inputs") return FeatureSource::inputs;
    throw RangeError("feature source must be outputs or inputs, got '" + s + "'");
}

/// Number of leading layers to run to obtain the fused features.
inline std::size_t feature_layer_end(const NetworkSpec& spec, FusionLayer layer, FeatureSource source) {
    const std::size_t i = spec.layer_index(fusion_layer_name(layer));
    return source == FeatureSource::outputs ? i + 1 : i;
}

inline std::size_t feature_dim(const NetworkSpec& spec, FusionLayer layer, FeatureSource source) {
    const std::size_t end = feature_layer_end(spec, layer, source);
    std::size_t c = spec.input_channels;
    for (std::size_t i = 0; i < end; ++i) c = output_channels(spec.layers[i], c);
    return c;
}

template <typename T>
struct FusionModel {
    Network<T> haptic;
    Network<T> visual;
    Network<T> head;
    FusionLayer layer = FusionLayer::fc2;
    FeatureSource source = FeatureSource::outputs;

    std::size_t haptic_end() const { return feature_layer_end(haptic.spec(), layer, source); }
    std::size_t visual_end() const { return feature_layer_end(visual.spec(), layer, source); }
};

/// Wraps two unimodal networks with a freshly initialized fusion head.
template <typename T>
FusionModel<T> make_fusion_model(Network<T> haptic, Network<T> visual, FusionLayer layer, FeatureSource source,
                                 std::uint64_t seed, double init_std = 0.01) {
    const auto hd = feature_dim(haptic.spec(), layer, source);
    const auto vd = feature_dim(visual.spec(), layer, source);
    if (haptic.spec().class_count != visual.spec().class_count)
        throw RangeError("haptic and visual networks disagree on the class count");
    auto head = Network<T>::random(build_fusion_head(hd, vd, haptic.spec().class_count), seed, init_std);
    return {std::move(haptic), std::move(visual), std::move(head), layer, source};
}

/// K (haptic location, visual location) index pairs drawn uniformly with replacement.
template <typename Rng>
std::vector<std::pair<std::size_t, std::size_t>> sample_fusion_pairs(std::size_t haptic_locations,
                                                                     std::size_t visual_locations, std::size_t K,
                                                                     Rng& rng) {
    if (K < 1) throw RangeError("fusion needs K >= 1 samples");
    if (haptic_locations == 0 || visual_locations == 0) throw RangeError("empty feature map");
    std::uniform_int_distribution<std::size_t> hd(0, haptic_locations - 1), vd(0, visual_locations - 1);
    std::vector<std::pair<std::size_t, std::size_t>> pairs(K);
    for (auto& p : pairs) {
        p.first = hd(rng);
        p.second = vd(rng);
    }
    return pairs;
}

/// Concatenates the chosen feature vectors into a [Dh+Dv, 1, n] batch.
template <typename T>
Tensor<T> gather_fused_features(const Tensor<T>& hf, const Tensor<T>& vf,
                                std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    const std::size_t Dh = hf.dim(0), Dv = vf.dim(0), Lh = hf.dim(1) * hf.dim(2), Lv = vf.dim(1) * vf.dim(2);
    const std::size_t n = pairs.size();
    Tensor<T> batch({Dh + Dv, 1, n});
    for (std::size_t k = 0; k < n; ++k) {
        const auto [h, v] = pairs[k];
        for (std::size_t c = 0; c < Dh; ++c) batch[c * n + k] = hf[c * Lh + h];
        for (std::size_t c = 0; c < Dv; ++c) batch[(Dh + c) * n + k] = vf[c * Lv + v];
    }
    return batch;
}

/// Samples K feature pairs from the two feature maps, classifies each with the
/// fusion head and votes over the K labels.
template <typename T, typename Rng>
VoteResult classify_fused(const FusionModel<T>& model, const Tensor<T>& spectrogram, const Tensor<T>& image,
                          std::size_t K, Rng& rng) {
    if (K < 1) throw RangeError("fusion needs K >= 1 samples");
    const auto hrf = receptive_field(model.haptic.spec());
    const auto vrf = receptive_field(model.visual.spec());
    if (spectrogram.rank() != 3 || spectrogram.dim(2) < hrf.min_input.w)
        throw RangeError("haptic input needs at least " + std::to_string(hrf.min_input.w) + " frames");
    if (image.rank() != 3 || image.dim(1) < vrf.min_input.h || image.dim(2) < vrf.min_input.w)
        throw RangeError("image input needs at least " + std::to_string(vrf.min_input.h) + "x" +
                         std::to_string(vrf.min_input.w) + " pixels");
    const Tensor<T> hf = model.haptic.forward(spectrogram, model.haptic_end());
    const Tensor<T> vf = model.visual.forward(image, model.visual_end());
    const auto pairs = sample_fusion_pairs(hf.dim(1) * hf.dim(2), vf.dim(1) * vf.dim(2), K, rng);
    return vote_grid(model.head.forward(gather_fused_features<T>(hf, vf, pairs)));
}

}  // namespace texturefuse
