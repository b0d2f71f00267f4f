#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecnn/error.hpp"
#include "ecnn/rng.hpp"

namespace ecnn {

/// Ordered list of dimension extents, each >= 1. Row-major: the last extent
/// varies fastest.
class Shape {
public:
    /// Rank-0 placeholder held by default-constructed tensors (0 elements).
    Shape() = default;
    Shape(std::initializer_list<std::size_t> extents);
    explicit Shape(std::vector<std::size_t> extents);

    std::size_t rank() const { return extents_.size(); }
    std::size_t operator[](std::size_t axis) const { return extents_.at(axis); }
    std::span<const std::size_t> extents() const { return extents_; }
    std::size_t element_count() const { return count_; }

    /// flat(i,j,k) = (i*b + j)*c + k for extents [a,b,c].
    std::size_t flat_index(std::span<const std::size_t> index) const;
    std::vector<std::size_t> unflatten(std::size_t flat) const;

    std::string to_string() const;

    friend bool operator==(const Shape& a, const Shape& b) { return a.extents_ == b.extents_; }

private:
    void validate();

    std::vector<std::size_t> extents_;
    std::size_t count_ = 0;
};

/// Dense row-major tensor owning its storage.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_.element_count(), fill) {}
    BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != shape_.element_count()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.to_string());
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    template <typename... I>
    T& at(I... index) {
        const std::size_t idx[] = {static_cast<std::size_t>(index)...};
        return data_[checked_flat(idx)];
    }
    template <typename... I>
    const T& at(I... index) const {
        const std::size_t idx[] = {static_cast<std::size_t>(index)...};
        return data_[checked_flat(idx)];
    }

    /// Same data viewed under a new shape with equal element count.
    BasicTensor reshaped(Shape shape) const& { return BasicTensor(std::move(shape), data_); }
    BasicTensor reshaped(Shape shape) && { return BasicTensor(std::move(shape), std::move(data_)); }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    std::size_t checked_flat(std::span<const std::size_t> idx) const {
        if (idx.size() != shape_.rank()) {
            throw ShapeError("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                             std::to_string(shape_.rank()));
        }
        for (std::size_t a = 0; a < idx.size(); ++a) {
            if (idx[a] >= shape_[a]) {
                throw ShapeError("index out of range on axis " + std::to_string(a) + " of " +
                                 shape_.to_string());
            }
        }
        return shape_.flat_index(idx);
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

enum class ElementwiseOp { add, sub, mul };

/// Throws NumericError naming `what` if any value is NaN or infinite.
template <typename T>
void ensure_finite(const BasicTensor<T>& t, const std::string& what) {
    const auto v = t.values();
    // x - x is NaN exactly when x is not finite; this form vectorizes.
    bool bad = false;
    for (const T x : v) bad |= !(x - x == T{0});
    if (!bad) return;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw NumericError(what + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

template <typename T>
BasicTensor<T> zeros(const Shape& shape) {
    return BasicTensor<T>(shape, T{0});
}

template <typename T = float>
BasicTensor<T> uniform_init(const Shape& shape, double lo, double hi, Rng& rng) {
    if (!(lo < hi)) {
        throw NumericError("uniform_init requires lo < hi");
    }
    BasicTensor<T> t(shape);
    for (auto& v : t.values()) {
        auto x = static_cast<T>(rng.uniform(lo, hi));
        // Narrowing to float can round onto hi.
        if (!(x < static_cast<T>(hi))) {
            x = std::nextafter(static_cast<T>(hi), static_cast<T>(lo));
        }
        v = x;
    }
    return t;
}

template <typename T>
BasicTensor<T> elementwise(const BasicTensor<T>& a, const BasicTensor<T>& b, ElementwiseOp op) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError("elementwise shape mismatch: " + a.shape().to_string() + " vs " +
                         b.shape().to_string());
    }
    BasicTensor<T> out(a.shape());
    const auto x = a.values();
    const auto y = b.values();
    auto o = out.values();
    switch (op) {
        case ElementwiseOp::add:
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
            break;
        case ElementwiseOp::sub:
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
            break;
        case ElementwiseOp::mul:
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
            break;
    }
    ensure_finite(out, "elementwise");
    return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return elementwise(a, b, ElementwiseOp::add);
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return elementwise(a, b, ElementwiseOp::sub);
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return elementwise(a, b, ElementwiseOp::mul);
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, double s) {
    if (!std::isfinite(s)) {
        throw NumericError("scale factor must be finite");
    }
    BasicTensor<T> out(a.shape());
    const auto x = a.values();
    auto o = out.values();
    const auto f = static_cast<T>(s);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * f;
    ensure_finite(out, "scale");
    return out;
}

/// Sum in flat-index order with a double accumulator.
template <typename T>
double reduce_sum(const BasicTensor<T>& a) {
    double acc = 0.0;
    for (const T v : a.values()) acc += static_cast<double>(v);
    return acc;
}

template <typename T>
double reduce_mean(const BasicTensor<T>& a) {
    if (a.size() == 0) {
        throw ShapeError("reduce_mean of empty tensor");
    }
    return reduce_sum(a) / static_cast<double>(a.size());
}

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError("dot shape mismatch: " + a.shape().to_string() + " vs " +
                         b.shape().to_string());
    }
    const auto x = a.values();
    const auto y = b.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    }
    return acc;
}

template <typename U, typename T>
BasicTensor<U> cast(const BasicTensor<T>& a) {
    std::vector<U> v(a.size());
    std::transform(a.values().begin(), a.values().end(), v.begin(),
                   [](T x) { return static_cast<U>(x); });
    return BasicTensor<U>(a.shape(), std::move(v));
}

}  // namespace ecnn
