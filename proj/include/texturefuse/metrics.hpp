#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "texturefuse/dataset.hpp"
#include "texturefuse/inference.hpp"

namespace texturefuse {

struct Metrics {
    std::size_t class_count = 0;
    double fragment_accuracy = 0;
    double voting_accuracy = 0;
    std::vector<std::vector<double>> confusion;  // rows: true class, row-normalised over fragments
    std::vector<double> per_class_fragment;
    std::size_t fragments = 0;
    std::size_t items = 0;
};

/// Collects per-item vote results into fragment and voting statistics.
class MetricsAccumulator {
   public:
    explicit MetricsAccumulator(std::size_t class_count)
        : counts_(class_count, std::vector<std::size_t>(class_count, 0)) {}

    void add(std::size_t true_class, const VoteResult& r) {
        if (true_class >= counts_.size()) throw RangeError("true class outside the class list");
        for (auto l : r.fragment_labels) {
            if (l >= counts_.size()) throw RangeError("predicted label outside the class list");
            ++counts_[true_class][l];
        }
        ++items_;
        if (r.label == true_class) ++votes_correct_;
    }

    Metrics finish() const {
        const std::size_t C = counts_.size();
        Metrics m;
        m.class_count = C;
        m.items = items_;
        m.confusion.assign(C, std::vector<double>(C, 0.0));
        m.per_class_fragment.assign(C, 0.0);
        std::size_t correct = 0;
        for (std::size_t t = 0; t < C; ++t) {
            std::size_t row = 0;
            for (auto n : counts_[t]) row += n;
            m.fragments += row;
            correct += counts_[t][t];
            if (row == 0) continue;
            for (std::size_t p = 0; p < C; ++p) m.confusion[t][p] = double(counts_[t][p]) / double(row);
            m.per_class_fragment[t] = m.confusion[t][t];
        }
        m.fragment_accuracy = m.fragments ? double(correct) / double(m.fragments) : 0.0;
        m.voting_accuracy = items_ ? double(votes_correct_) / double(items_) : 0.0;
        return m;
    }

   private:
    std::vector<std::vector<std::size_t>> counts_;
    std::size_t items_ = 0;
    std::size_t votes_correct_ = 0;
};

/// Dense prediction and vote on every held-out trace (normalised per trace).
template <typename T>
Metrics evaluate_haptic(const Network<T>& net, const Dataset& data, const FoldSplit& fold) {
    MetricsAccumulator acc(data.class_count());
    for (std::size_t c = 0; c < data.class_count(); ++c)
        for (auto i : fold.test_haptic[c]) {
            const auto s = normalize_channels(Spectrogram{*data.haptic[c][i].get(), 500, 100});
            acc.add(c, classify_haptic(net, s.frames.template cast<T>()));
        }
    return acc.finish();
}

/// Dense prediction and vote on every held-out image after mean subtraction.
template <typename T>
Metrics evaluate_visual(const Network<T>& net, const Dataset& data, const FoldSplit& fold, const ChannelMeans& means) {
    MetricsAccumulator acc(data.class_count());
    for (std::size_t c = 0; c < data.class_count(); ++c)
        for (auto i : fold.test_images[c]) {
            const TextureImage img{*data.images[c][i].get(), ""};
            acc.add(c, classify_image(net, mean_subtract(img, means).template cast<T>()));
        }
    return acc.finish();
}

/// Held-out trace j of a class is paired with held-out image j (mod count) of
/// the same class; each pair contributes K sampled fragments.
template <typename T>
Metrics evaluate_fusion(const FusionModel<T>& model, const Dataset& data, const FoldSplit& fold,
                        const ChannelMeans& means, std::size_t K, std::uint64_t seed) {
    MetricsAccumulator acc(data.class_count());
    std::mt19937_64 rng(seed);
    for (std::size_t c = 0; c < data.class_count(); ++c) {
        const auto& th = fold.test_haptic[c];
        const auto& tv = fold.test_images[c];
        if (th.empty() || tv.empty()) continue;
        for (std::size_t j = 0; j < std::max(th.size(), tv.size()); ++j) {
            const auto s = normalize_channels(Spectrogram{*data.haptic[c][th[j % th.size()]].get(), 500, 100});
            const TextureImage img{*data.images[c][tv[j % tv.size()]].get(), ""};
            acc.add(c, classify_fused(model, s.frames.template cast<T>(), mean_subtract(img, means).template cast<T>(),
                                      K, rng));
        }
    }
    return acc.finish();
}

/// Mean over folds of every statistic.
inline Metrics aggregate(std::span<const Metrics> folds) {
    if (folds.empty()) throw RangeError("nothing to aggregate");
    Metrics m;
    const std::size_t C = folds.front().class_count;
    m.class_count = C;
    m.confusion.assign(C, std::vector<double>(C, 0.0));
    m.per_class_fragment.assign(C, 0.0);
    const double n = double(folds.size());
    for (const auto& f : folds) {
        if (f.class_count != C) throw RangeError("folds disagree on the class count");
        m.fragment_accuracy += f.fragment_accuracy / n;
        m.voting_accuracy += f.voting_accuracy / n;
        m.fragments += f.fragments;
        m.items += f.items;
        for (std::size_t t = 0; t < C; ++t) {
            m.per_class_fragment[t] += f.per_class_fragment[t] / n;
            for (std::size_t p = 0; p < C; ++p) m.confusion[t][p] += f.confusion[t][p] / n;
        }
    }
    return m;
}

inline nlohmann::json metrics_json(const Metrics& m, const std::vector<std::string>& classes) {
    nlohmann::json j;
    j["fragment_accuracy"] = m.fragment_accuracy;
    j["voting_accuracy"] = m.voting_accuracy;
    j["fragments"] = m.fragments;
    j["items"] = m.items;
    j["class_count"] = m.class_count;
    j["classes"] = classes;
    return j;
}

/// metrics.json, confusion.csv (one row per true class) and per_class.csv.
inline void write_reports(const std::filesystem::path& dir, const Metrics& m, const std::vector<std::string>& classes,
                          const nlohmann::json& extra = {}) {
    if (classes.size() != m.class_count) throw RangeError("class names do not match the metrics");
    std::filesystem::create_directories(dir);
    nlohmann::json j = metrics_json(m, classes);
    if (extra.is_object())
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream(dir / "metrics.json") << j.dump(2) << '\n';

    std::ofstream conf(dir / "confusion.csv");
    conf << "true_class";
    for (const auto& c : classes) conf << ',' << c;
    conf << '\n';
    for (std::size_t t = 0; t < m.class_count; ++t) {
        conf << classes[t];
        for (double v : m.confusion[t]) conf << ',' << v;
        conf << '\n';
    }

    std::ofstream per(dir / "per_class.csv");
    per << "class,fragment_accuracy\n";
    for (std::size_t t = 0; t < m.class_count; ++t) per << classes[t] << ',' << m.per_class_fragment[t] << '\n';
    if (!conf || !per) throw FormatError("cannot write reports to " + dir.string());
}

}  // namespace texturefuse
