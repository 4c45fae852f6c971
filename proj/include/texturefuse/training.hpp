#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "texturefuse/dataset.hpp"
#include "texturefuse/inference.hpp"
#include "texturefuse/nets.hpp"
#include "texturefuse/optim.hpp"

namespace texturefuse {

struct TrainLogEntry {
    std::size_t iteration = 0;
    double lr = 0;
    double loss = 0;  // mean over the last log_every iterations
};

using TrainLogger = std::function<void(const TrainLogEntry&)>;

template <typename T>
struct TrainResult {
    Network<T> net;
    std::vector<double> losses;  // one per iteration
    std::vector<TrainLogEntry> log;
    ChannelMeans means{0, 0, 0};  // visual nets only
    bool trunk_imported = false;
};

namespace detail {

inline std::vector<std::string> parameter_labels(const NetworkSpec& spec, const std::string& prefix = "") {
    std::vector<std::string> out;
    for (const auto& l : spec.layers)
        if (l.kind == LayerKind::conv) {
            out.push_back(prefix + l.name + ".weight");
            out.push_back(prefix + l.name + ".bias");
        }
    return out;
}

template <typename T>
void scale_gradients(Gradients<T>& g, double s) {
    for (auto& t : g)
        for (auto& v : t.values()) v = T(double(v) * s);
}

/// Uniform class, then uniform item among that class's training indices.
template <typename Rng>
std::pair<std::size_t, std::size_t> balanced_draw(const std::vector<std::vector<std::size_t>>& train, Rng& rng) {
    std::uniform_int_distribution<std::size_t> cls(0, train.size() - 1);
    const std::size_t c = cls(rng);
    if (train[c].empty()) throw RangeError("class " + std::to_string(c) + " has no training items");
    std::uniform_int_distribution<std::size_t> item(0, train[c].size() - 1);
    return {c, train[c][item(rng)]};
}

class LossTracker {
   public:
    LossTracker(std::size_t log_every, const TrainLogger& logger) : every_(log_every), logger_(logger) {}

    void record(std::size_t iter, double lr, double loss, std::vector<double>& losses, std::vector<TrainLogEntry>& log) {
        if (!std::isfinite(loss)) {
            std::ostringstream os;
            os << "non-finite loss at iteration " << iter << " (lr=" << lr << ")";
            throw NumericError(os.str());
        }
        losses.push_back(loss);
        sum_ += loss;
        ++count_;
        if ((iter + 1) % every_ == 0) {
            TrainLogEntry e{iter + 1, lr, sum_ / double(count_)};
            log.push_back(e);
            if (logger_) logger_(e);
            sum_ = 0;
            count_ = 0;
        }
    }

   private:
    std::size_t every_;
    const TrainLogger& logger_;
    double sum_ = 0;
    std::size_t count_ = 0;
};

template <typename T, typename Rng>
Tensor<T> haptic_training_input(const Tensor<float>& spectrogram, std::size_t frames, std::size_t min_frames, Rng& rng) {
    Spectrogram s{spectrogram, 500, 100};
    if (s.frame_count() < min_frames)
        throw RangeError("training spectrogram has " + std::to_string(s.frame_count()) + " frames, at least " +
                         std::to_string(min_frames) + " are required");
    const Spectrogram w = subsample_training_window(s, std::min(frames, s.frame_count()), rng);
    return normalize_channels(w).frames.template cast<T>();
}

template <typename T, typename Rng>
Tensor<T> visual_training_input(const Tensor<float>& image, std::size_t size, RotationMode rotation,
                                const ChannelMeans& means, Rng& rng) {
    const TextureImage img{image, ""};
    TextureImage patch;
    if (rotation == RotationMode::arbitrary) {
        // rotate a larger crop so the inscribed square still covers the patch
        const auto big = std::min({img.height(), img.width(), std::size_t(std::ceil(double(size) * std::sqrt(2.0))) + 1});
        std::uniform_real_distribution<double> angle(0.0, 360.0);
        auto r = rotate_arbitrary(sample_patch(img, big, rng), angle(rng));
        patch = r.height() >= size ? sample_patch(r, size, rng) : sample_patch(img, size, rng);
    } else {
        patch = sample_patch(img, size, rng);
        if (rotation == RotationMode::right_angle) patch = random_rotate(patch, rng);
    }
    return mean_subtract(patch, means).template cast<T>();
}

inline ChannelMeans training_means(const Dataset& data, const FoldSplit& fold) {
    std::array<double, 3> sum{0, 0, 0};
    double count = 0;
    for (std::size_t c = 0; c < data.class_count(); ++c)
        for (auto i : fold.train_images[c]) {
            const auto t = data.images[c][i].get();
            const std::size_t HW = t->dim(1) * t->dim(2);
            for (std::size_t ch = 0; ch < 3; ++ch)
                for (std::size_t k = 0; k < HW; ++k) sum[ch] += (*t)[ch * HW + k];
            count += double(HW);
        }
    if (count == 0) return {0, 0, 0};
    return {float(sum[0] / count), float(sum[1] / count), float(sum[2] / count)};
}

/// One supervised step contribution: forward to logits, averaged per-location
/// cross entropy, backward into grads. Returns the loss.
template <typename T, typename Rng>
double accumulate_example(const Network<T>& net, const Tensor<T>& x, std::size_t label, Gradients<T>& grads, Rng& rng) {
    const std::size_t logits_end = net.spec().layers.size() - 1;  // stop before the softmax
    const auto tr = net.forward_train(x, rng, logits_end);
    const auto ce = softmax_cross_entropy(tr.output(), label);
    net.backward(tr, ce.grad_logits, grads, npos, false);
    return double(ce.loss);
}

template <typename T, typename MakeInput>
TrainResult<T> train_unimodal(Network<T> net, const std::vector<std::vector<std::size_t>>& train, const TrainConfig& cfg,
                              MakeInput&& make_input, const TrainLogger& logger) {
    const LrSchedule sched = cfg.effective_schedule();
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    auto state = AdamState<T>::for_parameters(net.parameters(), cfg.weight_decay);
    const auto labels = parameter_labels(net.spec());
    TrainResult<T> r{net, {}, {}, {0, 0, 0}, false};
    r.losses.reserve(sched.total_iters);
    LossTracker tracker(cfg.log_every, logger);
    for (std::size_t it = 0; it < sched.total_iters; ++it) {
        const double lr = lr_at(sched, it);
        auto grads = r.net.zero_gradients();
        double loss = 0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const auto [c, i] = balanced_draw(train, rng);
            loss += accumulate_example(r.net, make_input(c, i, rng), c, grads, rng);
        }
        loss /= double(cfg.batch_size);
        tracker.record(it, lr, loss, r.losses, r.log);
        scale_gradients(grads, 1.0 / double(cfg.batch_size));
        try {
            adam_step(r.net.parameters(), grads, state, lr, {}, labels);
        } catch (const NumericError& e) {
            std::ostringstream os;
            os << e.what() << " at iteration " << it << " (lr=" << lr << ")";
            throw NumericError(os.str());
        }
    }
    return r;
}

}  // namespace detail

/// HapticNet on class-balanced batches of randomly placed input_size-frame
/// windows, each normalised per channel.
template <typename T = float>
TrainResult<T> train_haptic(const Dataset& data, const FoldSplit& fold, const TrainConfig& cfg,
                            const TrainLogger& logger = {}) {
    cfg.validate();
    const auto spec = build_hapticnet(cfg.build_options(data.class_count()));
    const auto min_frames = receptive_field(spec).min_input.w;
    if (cfg.input_size < min_frames)
        throw RangeError("haptic input_size " + std::to_string(cfg.input_size) + " is below the network minimum of " +
                         std::to_string(min_frames) + " frames");
    auto net = Network<T>::random(spec, cfg.seed, cfg.init_std);
    return detail::train_unimodal<T>(
        std::move(net), fold.train_haptic, cfg,
        [&](std::size_t c, std::size_t i, auto& rng) {
            return detail::haptic_training_input<T>(*data.haptic[c][i].get(), cfg.input_size, min_frames, rng);
        },
        logger);
}

/// VisualNet (or the TCNN variant) on rotated, mean-subtracted patches. The
/// channel means come from the fold's training images.
template <typename T = float>
TrainResult<T> train_visual(const Dataset& data, const FoldSplit& fold, const TrainConfig& cfg, NetKind kind = NetKind::visual,
                            const TrainLogger& logger = {}) {
    cfg.validate();
    if (kind != NetKind::visual && kind != NetKind::visual_tcnn) throw UsageError("train_visual needs a visual net kind");
    const auto spec = build_network(kind, cfg.build_options(data.class_count()));
    const auto min = receptive_field(spec).min_input;
    if (cfg.input_size < std::max(min.h, min.w))
        throw RangeError("visual input_size " + std::to_string(cfg.input_size) + " is below the network minimum of " +
                         std::to_string(min.h));
    auto net = Network<T>::random(spec, cfg.seed, cfg.init_std);
    bool imported = false;
    if (!cfg.trunk_weights.empty()) {
        auto imp = import_alexnet_conv_weights(net, cfg.trunk_weights);
        imported = imp.imported;
        net = std::move(imp.net);
    }
    const ChannelMeans means = detail::training_means(data, fold);
    auto r = detail::train_unimodal<T>(
        std::move(net), fold.train_images, cfg,
        [&](std::size_t c, std::size_t i, auto& rng) {
            return detail::visual_training_input<T>(*data.images[c][i].get(), cfg.input_size, cfg.rotation, means, rng);
        },
        logger);
    r.means = means;
    r.trunk_imported = imported;
    return r;
}

template <typename T>
struct FusionTrainResult {
    FusionModel<T> model;
    std::vector<double> losses;
    std::vector<TrainLogEntry> log;
};

/// Gradients of one fused example. Both inputs must belong to the same class.
/// Feature pairs are drawn uniformly when a feature map has more than one location.
template <typename T, typename Rng>
double fusion_example(const FusionModel<T>& m, const Tensor<T>& spectrogram, const Tensor<T>& image,
                      std::size_t haptic_class, std::size_t image_class, Gradients<T>& gh, Gradients<T>& gv,
                      Gradients<T>& ghead, Rng& rng) {
    if (haptic_class != image_class)
        throw RangeError("fusion pair mixes class " + std::to_string(haptic_class) + " (haptic) with class " +
                         std::to_string(image_class) + " (image)");
    const auto th = m.haptic.forward_train(spectrogram, rng, m.haptic_end());
    const auto tv = m.visual.forward_train(image, rng, m.visual_end());
    const Tensor<T>& hf = th.output();
    const Tensor<T>& vf = tv.output();
    const auto pair = sample_fusion_pairs(hf.dim(1) * hf.dim(2), vf.dim(1) * vf.dim(2), 1, rng);
    const auto x = gather_fused_features<T>(hf, vf, pair);

    const auto tf = m.head.forward_train(x, rng, m.head.spec().layers.size() - 1);
    const auto ce = softmax_cross_entropy(tf.output(), haptic_class);
    const auto dx = m.head.backward(tf, ce.grad_logits, ghead);

    // scatter the feature gradient back to the sampled locations
    const std::size_t Dh = hf.dim(0), Lh = hf.dim(1) * hf.dim(2), Lv = vf.dim(1) * vf.dim(2);
    Tensor<T> dh(hf.shape()), dv(vf.shape());
    for (std::size_t c = 0; c < Dh; ++c) dh[c * Lh + pair[0].first] = dx[c];
    for (std::size_t c = 0; c < vf.dim(0); ++c) dv[c * Lv + pair[0].second] = dx[Dh + c];
    m.haptic.backward(th, dh, gh, npos, false);
    m.visual.backward(tv, dv, gv, npos, false);
    return double(ce.loss);
}

/// Joint fine-tuning of both unimodal trunks (up to the fused layer) and a new
/// fusion head on same-class (spectrogram window, image patch) pairs. The head
/// learns at head_lr_multiplier times the scheduled rate.
template <typename T = float>
FusionTrainResult<T> train_fusion(const Dataset& data, const FoldSplit& fold, const TrainConfig& cfg, Network<T> haptic,
                                  Network<T> visual, const ChannelMeans& means, const TrainLogger& logger = {}) {
    cfg.validate();
    auto model = make_fusion_model(std::move(haptic), std::move(visual), cfg.fusion_layer, cfg.feature_source,
                                   cfg.seed, cfg.init_std);
    if (model.head.spec().class_count != data.class_count())
        throw RangeError("networks classify " + std::to_string(model.head.spec().class_count) +
                         " classes, dataset has " + std::to_string(data.class_count()));
    const auto hmin = receptive_field(model.haptic.spec()).min_input.w;
    const auto vmin = receptive_field(model.visual.spec()).min_input;
    if (cfg.fusion_haptic_frames < hmin || cfg.fusion_image_size < std::max(vmin.h, vmin.w))
        throw RangeError("fusion inputs must be at least " + std::to_string(hmin) + " frames and " +
                         std::to_string(vmin.h) + " pixels");

    const LrSchedule sched = cfg.effective_schedule();
    std::mt19937_64 rng(cfg.seed ^ 0xc2b2ae3d27d4eb4full);
    auto sh = AdamState<T>::for_parameters(model.haptic.parameters(), cfg.weight_decay);
    auto sv = AdamState<T>::for_parameters(model.visual.parameters(), cfg.weight_decay);
    auto shead = AdamState<T>::for_parameters(model.head.parameters(), cfg.weight_decay);
    // layers past the fused one do not take part
    auto multipliers = [](const Network<T>& n, std::size_t end) {
        std::vector<double> m(n.parameters().size(), 1.0);
        for (std::size_t p = 0; p < m.size(); ++p)
            if (n.layer_of_parameter(p) >= end) m[p] = 0.0;
        return m;
    };
    const auto mh = multipliers(model.haptic, model.haptic_end());
    const auto mv = multipliers(model.visual, model.visual_end());
    const std::vector<double> mhead(model.head.parameters().size(), cfg.head_lr_multiplier);
    const auto lh = detail::parameter_labels(model.haptic.spec(), "haptic.");
    const auto lv = detail::parameter_labels(model.visual.spec(), "visual.");
    const auto lf = detail::parameter_labels(model.head.spec(), "head.");

    FusionTrainResult<T> r{std::move(model), {}, {}};
    detail::LossTracker tracker(cfg.log_every, logger);
    std::uniform_int_distribution<std::size_t> cls(0, data.class_count() - 1);
    for (std::size_t it = 0; it < sched.total_iters; ++it) {
        const double lr = lr_at(sched, it);
        auto gh = r.model.haptic.zero_gradients();
        auto gv = r.model.visual.zero_gradients();
        auto gf = r.model.head.zero_gradients();
        double loss = 0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const std::size_t c = cls(rng);
            const auto& th = fold.train_haptic[c];
            const auto& tv = fold.train_images[c];
            if (th.empty() || tv.empty()) throw RangeError("class " + data.classes[c] + " lacks training items");
            std::uniform_int_distribution<std::size_t> hi(0, th.size() - 1), vi(0, tv.size() - 1);
            const auto hx = detail::haptic_training_input<T>(*data.haptic[c][th[hi(rng)]].get(), cfg.fusion_haptic_frames,
                                                             hmin, rng);
            const auto vx = detail::visual_training_input<T>(*data.images[c][tv[vi(rng)]].get(), cfg.fusion_image_size,
                                                             cfg.rotation, means, rng);
            loss += fusion_example(r.model, hx, vx, c, c, gh, gv, gf, rng);
        }
        loss /= double(cfg.batch_size);
        tracker.record(it, lr, loss, r.losses, r.log);
        const double s = 1.0 / double(cfg.batch_size);
        detail::scale_gradients(gh, s);
        detail::scale_gradients(gv, s);
        detail::scale_gradients(gf, s);
        try {
            adam_step(r.model.haptic.parameters(), gh, sh, lr, mh, lh);
            adam_step(r.model.visual.parameters(), gv, sv, lr, mv, lv);
            adam_step(r.model.head.parameters(), gf, shead, lr, mhead, lf);
        } catch (const NumericError& e) {
            std::ostringstream os;
            os << e.what() << " at iteration " << it << " (lr=" << lr << ")";
            throw NumericError(os.str());
        }
    }
    return r;
}

}  // namespace texturefuse
