#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>

#include "texturefuse/tensor.hpp"

namespace texturefuse {

/// RGB image as a [3,H,W] tensor with values in [0,1].
struct TextureImage {
    Tensor<float> pixels;
    std::string source_id;

    std::size_t height() const { return pixels.dim(1); }
    std::size_t width() const { return pixels.dim(2); }

    void validate() const {
        if (pixels.rank() != 3 || pixels.dim(0) != 3)
            throw ShapeError("texture image must be [3,H,W], got " + to_string(pixels.shape()));
        for (float v : pixels.values())
            if (!(v >= 0.0f && v <= 1.0f)) throw RangeError("image values must lie in [0,1]");
    }
};

using ChannelMeans = std::array<float, 3>;

namespace detail {
inline float bilinear(const Tensor<float>& x, std::size_t c, double y, double xx) {
    const std::size_t H = x.dim(1), W = x.dim(2);
    y = std::clamp(y, 0.0, double(H - 1));
    xx = std::clamp(xx, 0.0, double(W - 1));
    const std::size_t y0 = std::size_t(y), x0 = std::size_t(xx);
    const std::size_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    const double fy = y - double(y0), fx = xx - double(x0);
    const double top = (1 - fx) * x(c, y0, x0) + fx * x(c, y0, x1);
    const double bot = (1 - fx) * x(c, y1, x0) + fx * x(c, y1, x1);
    return float(std::clamp((1 - fy) * top + fy * bot, 0.0, 1.0));
}
}  // namespace detail

/// Bilinear downscale to ceil(H/2) x ceil(W/2) (pixel-centre aligned).
inline TextureImage half_resize(const TextureImage& img) {
    const std::size_t H = img.pixels.dim(1), W = img.pixels.dim(2);
    if (H < 2 || W < 2) throw RangeError("half-size resize needs both extents >= 2, got " + to_string(img.pixels.shape()));
    const std::size_t Ho = (H + 1) / 2, Wo = (W + 1) / 2;
    const double sy = double(H) / double(Ho), sx = double(W) / double(Wo);
    TextureImage out{Tensor<float>({img.pixels.dim(0), Ho, Wo}), img.source_id};
    for (std::size_t c = 0; c < img.pixels.dim(0); ++c)
        for (std::size_t i = 0; i < Ho; ++i)
            for (std::size_t j = 0; j < Wo; ++j)
                out.pixels(c, i, j) = detail::bilinear(img.pixels, c, (double(i) + 0.5) * sy - 0.5, (double(j) + 0.5) * sx - 0.5);
    return out;
}

inline TextureImage crop_patch(const TextureImage& img, std::size_t top, std::size_t left, std::size_t size) {
    return {crop(img.pixels, top, size, left, size), img.source_id};
}

/// Uniformly placed size x size crop.
template <typename Rng>
TextureImage sample_patch(const TextureImage& img, std::size_t size, Rng& rng) {
    if (size < 1 || img.height() < size || img.width() < size)
        throw RangeError("image " + to_string(img.pixels.shape()) + " is smaller than a " + std::to_string(size) +
                         "x" + std::to_string(size) + " patch");
    std::uniform_int_distribution<std::size_t> top(0, img.height() - size), left(0, img.width() - size);
    const std::size_t t = top(rng);
    return crop_patch(img, t, left(rng), size);
}

/// Clockwise rotation by quarter_turns * 90 degrees of a square image.
inline TextureImage rotate_quarter_turns(const TextureImage& img, unsigned quarter_turns) {
    const std::size_t n = img.height();
    if (img.width() != n) throw ShapeError("right-angle rotation needs a square image, got " + to_string(img.pixels.shape()));
    TextureImage out = img;
    for (unsigned q = 0; q < quarter_turns % 4; ++q) {
        const Tensor<float> src = out.pixels;
        for (std::size_t c = 0; c < src.dim(0); ++c)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) out.pixels(c, i, j) = src(c, n - 1 - j, i);
    }
    return out;
}

/// Rotation by 0, 90, 180 or 270 degrees, drawn uniformly.
template <typename Rng>
TextureImage random_rotate(const TextureImage& img, Rng& rng) {
    std::uniform_int_distribution<unsigned> turns(0, 3);
    return rotate_quarter_turns(img, turns(rng));
}

/// Arbitrary-angle bilinear rotation about the centre, cropped to the largest
/// axis-aligned square that contains no border fill.
inline TextureImage rotate_arbitrary(const TextureImage& img, double degrees) {
    const std::size_t n = img.height();
    if (img.width() != n) throw ShapeError("rotation needs a square image, got " + to_string(img.pixels.shape()));
    const double a = degrees * std::numbers::pi / 180.0, ca = std::cos(a), sa = std::sin(a);
    const std::size_t side =
        std::max<std::size_t>(1, std::size_t(std::floor(double(n) / (std::abs(ca) + std::abs(sa)))));
    const double centre = (double(n) - 1.0) / 2.0, off = (double(n) - double(side)) / 2.0;
    TextureImage out{Tensor<float>({img.pixels.dim(0), side, side}), img.source_id};
    for (std::size_t c = 0; c < img.pixels.dim(0); ++c)
        for (std::size_t i = 0; i < side; ++i)
            for (std::size_t j = 0; j < side; ++j) {
                const double y = double(i) + off - centre, x = double(j) + off - centre;
                out.pixels(c, i, j) = detail::bilinear(img.pixels, c, ca * y + sa * x + centre, -sa * y + ca * x + centre);
            }
    return out;
}

inline Tensor<float> mean_subtract(const TextureImage& img, const ChannelMeans& means) {
    for (float m : means)
        if (!std::isfinite(m)) throw NumericError("channel means must be finite");
    Tensor<float> out = img.pixels;
    const std::size_t HW = img.height() * img.width();
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < HW; ++i) out[c * HW + i] -= means[c];
    return out;
}

inline Tensor<float> add_channel_means(const Tensor<float>& centred, const ChannelMeans& means) {
    Tensor<float> out = centred;
    const std::size_t HW = centred.dim(1) * centred.dim(2);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < HW; ++i) out[c * HW + i] += means[c];
    return out;
}

/// Per-channel pixel mean over a set of images.
inline ChannelMeans channel_means(std::span<const TextureImage> images) {
    std::array<double, 3> sum{0, 0, 0};
    double count = 0;
    for (const auto& img : images) {
        const std::size_t HW = img.height() * img.width();
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < HW; ++i) sum[c] += img.pixels[c * HW + i];
        count += double(HW);
    }
    if (count == 0) return {0, 0, 0};
    return {float(sum[0] / count), float(sum[1] / count), float(sum[2] / count)};
}

}  // namespace texturefuse
