#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "physr/errors.hpp"

namespace physr {

// Dense row-major n-dimensional array. The scalar type is templated so the
// same code runs in float for production training and double for oracles and
// gradient checks.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<size_t> shape, T fill = T(0))
        : shape_(std::move(shape)),
          data_(checked_numel(shape_), fill) {}

    const std::vector<size_t>& shape() const { return shape_; }
    size_t ndim() const { return shape_.size(); }
    size_t numel() const { return data_.size(); }
    size_t size(size_t axis) const { return shape_.at(axis); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    void reshape(std::vector<size_t> shape) {
        if (checked_numel(shape) != data_.size())
            throw DataError("reshape changes element count");
        shape_ = std::move(shape);
    }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(double(v))) return false;
        return true;
    }

  private:
    static size_t checked_numel(const std::vector<size_t>& shape) {
        size_t n = 1;
        for (size_t s : shape) {
            if (s == 0) throw DataError("tensor axis of size zero");
            n *= s;
        }
        return n;
    }

    std::vector<size_t> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
    Tensor<To> y(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) y[i] = To(x[i]);
    return y;
}

// y += a * x
template <typename T>
void axpy(T a, const Tensor<T>& x, Tensor<T>& y) {
    if (!x.same_shape(y)) throw DataError("axpy shape mismatch");
    for (size_t i = 0; i < x.numel(); ++i) y[i] += a * x[i];
}

template <typename T>
std::string shape_str(const Tensor<T>& x) {
    std::string s = "[";
    for (size_t i = 0; i < x.ndim(); ++i) {
        if (i) s += ",";
        s += std::to_string(x.shape()[i]);
    }
    return s + "]";
}

} // namespace physr
