#pragma once

// Generated datasets with known separability, for smoke tests and learnability checks.

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "texturefuse/dataset.hpp"
#include "texturefuse/haptic.hpp"
#include "texturefuse/visual.hpp"

namespace texturefuse {

inline constexpr std::size_t synthetic_pattern_count = 3;

/// [1,50,frames] spectrogram: a band of 10 channels (position set by pattern)
/// carries a slow periodic modulation, every other channel is white noise.
/// Per-channel normalisation keeps the contrast, so the classes stay separable.
template <typename Rng>
Tensor<float> band_spectrogram(std::size_t pattern, std::size_t frames, Rng& rng) {
    if (pattern >= synthetic_pattern_count) throw RangeError("band pattern must be 0, 1 or 2");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 0.03);
    const std::size_t lo = 5 + 15 * pattern, hi = lo + 10;
    const double period = 12.0 + 4.0 * u(rng), phase = 2 * std::numbers::pi * u(rng);
    Tensor<float> s({1, spectrogram_channels, frames});
    for (std::size_t f = 0; f < spectrogram_channels; ++f)
        for (std::size_t t = 0; t < frames; ++t) {
            double v = 0.2 * u(rng);
            if (f >= lo && f < hi) v = 1.0 + 0.8 * std::sin(2 * std::numbers::pi * double(t) / period + phase) + jitter(rng);
            s(0, f, t) = float(v);
        }
    return s;
}

/// Three-axis trace whose energy sits in a pattern-specific frequency band.
template <typename Rng>
AccelTrace3 band_trace(std::size_t pattern, std::size_t samples, Rng& rng) {
    if (pattern >= synthetic_pattern_count) throw RangeError("band pattern must be 0, 1 or 2");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.05);
    AccelTrace3 t;
    t.samples.resize(samples);
    // bins of a 500-sample window at 10 kHz are 20 Hz apart
    const double f0 = 20.0 * double(5 + 15 * pattern);
    std::vector<std::array<double, 4>> partials;  // freq, phase x/y/z
    for (int k = 0; k < 6; ++k)
        partials.push_back({f0 + 200.0 * u(rng), 2 * std::numbers::pi * u(rng), 2 * std::numbers::pi * u(rng),
                            2 * std::numbers::pi * u(rng)});
    const double mod = 1.0 + u(rng);
    for (std::size_t i = 0; i < samples; ++i) {
        const double time = double(i) / t.sample_rate_hz;
        const double env = 1.0 + 0.8 * std::sin(2 * std::numbers::pi * mod * time * 10.0);
        for (std::size_t a = 0; a < 3; ++a) {
            double v = noise(rng);
            for (const auto& p : partials) v += env * std::sin(2 * std::numbers::pi * p[0] * time + p[1 + a]) / 6.0;
            t.samples[i][a] = v;
        }
    }
    return t;
}

/// Stripes (0), dots (1) or checkerboard (2) with random scale, phase, tint and noise.
template <typename Rng>
TextureImage texture_image(std::size_t pattern, std::size_t size, Rng& rng) {
    if (pattern >= synthetic_pattern_count) throw RangeError("texture pattern must be 0, 1 or 2");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.04);
    const double period = 10.0 + 6.0 * u(rng), py = period * u(rng), px = period * u(rng);
    const bool vertical = u(rng) < 0.5;
    const std::array<double, 3> tint{0.8 + 0.2 * u(rng), 0.8 + 0.2 * u(rng), 0.8 + 0.2 * u(rng)};
    TextureImage img{Tensor<float>({3, size, size}), "synthetic"};
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j) {
            const double y = double(i) + py, x = double(j) + px;
            double v = 0;
            if (pattern == 0) {
                v = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * (vertical ? x : y) / period);
            } else if (pattern == 1) {
                const double dy = std::fmod(y, period) - period / 2, dx = std::fmod(x, period) - period / 2;
                v = std::hypot(dy, dx) < period * 0.25 ? 1.0 : 0.0;
            } else {
                v = ((long(y / (period / 2)) + long(x / (period / 2))) % 2) ? 1.0 : 0.0;
            }
            const double n = noise(rng);
            for (std::size_t c = 0; c < 3; ++c) img.pixels(c, i, j) = float(std::clamp(0.1 + 0.8 * v * tint[c] + n, 0.0, 1.0));
        }
    return img;
}

struct SyntheticOptions {
    std::size_t items_per_class = 10;
    std::size_t frames = 240;
    std::size_t image_size = 256;
    std::uint64_t seed = 1;
};

namespace detail {
inline DataItem resident(Tensor<float> t) { return {{}, std::make_shared<const Tensor<float>>(std::move(t))}; }
}  // namespace detail

/// Three classes; class k uses band pattern k and texture pattern k.
inline Dataset synthetic_dataset(const SyntheticOptions& o = {}) {
    std::mt19937_64 rng(o.seed);
    Dataset d;
    d.classes = {"band0-stripes", "band1-dots", "band2-checker"};
    d.haptic.resize(3);
    d.images.resize(3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < o.items_per_class; ++i) {
            d.haptic[c].push_back(detail::resident(band_spectrogram(c, o.frames, rng)));
            d.images[c].push_back(detail::resident(texture_image(c, o.image_size, rng).pixels));
        }
    return d;
}

/// Three classes that no single modality separates:
///   A = (band 0, stripes), B = (band 1, stripes), C = (band 1, dots).
/// Haptic items of C are the very items of B and image items of B are those of
/// A, so a unimodal net cannot tell the twin classes apart.
inline Dataset complementary_dataset(const SyntheticOptions& o = {}) {
    std::mt19937_64 rng(o.seed);
    Dataset d;
    d.classes = {"A", "B", "C"};
    d.haptic.resize(3);
    d.images.resize(3);
    for (std::size_t i = 0; i < o.items_per_class; ++i) {
        d.haptic[0].push_back(detail::resident(band_spectrogram(0, o.frames, rng)));
        d.haptic[1].push_back(detail::resident(band_spectrogram(1, o.frames, rng)));
        d.images[0].push_back(detail::resident(texture_image(0, o.image_size, rng).pixels));
        d.images[2].push_back(detail::resident(texture_image(1, o.image_size, rng).pixels));
    }
    d.haptic[2] = d.haptic[1];
    d.images[1] = d.images[0];
    return d;
}

/// Split with the same held-out indices in every class, so twin classes share
/// their test items too.
inline FoldSplit aligned_split(const Dataset& d, std::size_t test_items) {
    FoldSplit f;
    f.fold_count = 1;
    const std::size_t nh = d.haptic_per_class(), ni = d.images_per_class();
    if (test_items >= nh || test_items >= ni) throw RangeError("aligned split leaves no training items");
    for (std::size_t c = 0; c < d.class_count(); ++c) {
        f.train_haptic.emplace_back();
        f.test_haptic.emplace_back();
        f.train_images.emplace_back();
        f.test_images.emplace_back();
        for (std::size_t i = 0; i < nh; ++i) (i < nh - test_items ? f.train_haptic : f.test_haptic).back().push_back(i);
        for (std::size_t i = 0; i < ni; ++i) (i < ni - test_items ? f.train_images : f.test_images).back().push_back(i);
    }
    return f;
}

}  // namespace texturefuse
