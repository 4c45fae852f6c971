#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace texturefuse {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor or layer extents.
class ShapeError : public Error {
   public:
    using Error::Error;
};

/// API used out of order (e.g. backward without a recorded forward pass).
class UsageError : public Error {
   public:
    using Error::Error;
};

/// Argument outside its documented domain.
class RangeError : public Error {
   public:
    using Error::Error;
};

/// Malformed file or directory layout.
class FormatError : public Error {
   public:
    using Error::Error;
};

/// NaN or Inf where finite values are required.
class NumericError : public Error {
   public:
    using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ']';
    return os.str();
}

/// Two-dimensional extent (height, width) used for kernels, strides and grids.
struct Extent2 {
    std::size_t h = 1;
    std::size_t w = 1;
    friend bool operator==(const Extent2&, const Extent2&) = default;
};

/// Dense row-major tensor. The extents never change after construction;
/// values can be mutated in place (optimizer updates, accumulation).
// Storage aligned to the widest SIMD width so that vectorized kernels take the
// same code path (and summation order) no matter where the heap puts a buffer.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
class Tensor {
   public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), values_(element_count(shape_), fill) {
        check_extents();
    }

    Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(values.begin(), values.end()) {
        check_extents();
        if (values_.size() != element_count(shape_))
            throw ShapeError("tensor of shape " + to_string(shape_) + " needs " +
                             std::to_string(element_count(shape_)) + " values, got " +
                             std::to_string(values_.size()));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return shape_.empty(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }

    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    // Rank-3 (channel, row, column) access.
    T& operator()(std::size_t c, std::size_t h, std::size_t w) {
        return values_[(c * shape_[1] + h) * shape_[2] + w];
    }
    const T& operator()(std::size_t c, std::size_t h, std::size_t w) const {
        return values_[(c * shape_[1] + h) * shape_[2] + w];
    }

    void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
    }

    Tensor reshaped(Shape shape) const {
        if (element_count(shape) != size())
            throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
        return Tensor(std::move(shape), values_);
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(values_.begin(), values_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    Tensor& operator+=(const Tensor& other) {
        if (other.shape_ != shape_)
            throw ShapeError("cannot add " + to_string(other.shape_) + " to " + to_string(shape_));
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
        return *this;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

   private:
    void check_extents() const {
        for (auto d : shape_)
            if (d == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
    }

    Shape shape_;
    AlignedVector<T> values_;
};

/// Largest absolute elementwise difference between two equally shaped tensors.
template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("cannot compare " + to_string(a.shape()) + " with " + to_string(b.shape()));
    T worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

/// Copies rows [h0, h0+hn) and columns [w0, w0+wn) of every channel.
template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t h0, std::size_t hn, std::size_t w0, std::size_t wn) {
    if (x.rank() != 3) throw ShapeError("crop expects a [C,H,W] tensor, got " + to_string(x.shape()));
    if (h0 + hn > x.dim(1) || w0 + wn > x.dim(2) || hn == 0 || wn == 0)
        throw ShapeError("crop window out of range for " + to_string(x.shape()));
    const std::size_t C = x.dim(0);
    Tensor<T> out({C, hn, wn});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t h = 0; h < hn; ++h)
            std::copy_n(&x(c, h0 + h, w0), wn, &out(c, h, 0));
    return out;
}

/// Stacks [C1,H,W] and [C2,H,W] into [C1+C2,H,W].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw ShapeError("cannot concatenate " + to_string(a.shape()) + " and " + to_string(b.shape()));
    std::vector<T> v;
    v.reserve(a.size() + b.size());
    v.insert(v.end(), a.values().begin(), a.values().end());
    v.insert(v.end(), b.values().begin(), b.values().end());
    return Tensor<T>({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(v));
}

}  // namespace texturefuse
