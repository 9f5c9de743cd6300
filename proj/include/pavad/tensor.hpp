#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pavad/error.hpp"

namespace pavad {

// Dense row-major array with a small dynamic shape. Used for frame blocks,
// flow fields and network activations alike.
template <typename Scalar>
class Tensor {
public:
    using value_type = Scalar;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape, Scalar fill = Scalar(0))
        : shape_(std::move(shape)), data_(count(shape_), fill) {}
    Tensor(std::vector<int> shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
        require(data_.size() == count(shape_), ErrorKind::Shape, "data length does not match shape");
    }

    const std::vector<int>& shape() const noexcept { return shape_; }
    int dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    Scalar* data() noexcept { return data_.data(); }
    const Scalar* data() const noexcept { return data_.data(); }
    std::span<Scalar> values() noexcept { return data_; }
    std::span<const Scalar> values() const noexcept { return data_; }
    std::vector<Scalar>& storage() noexcept { return data_; }
    const std::vector<Scalar>& storage() const noexcept { return data_; }

    Scalar& operator[](std::size_t i) noexcept { return data_[i]; }
    const Scalar& operator[](std::size_t i) const noexcept { return data_[i]; }

    // Stride-aware views for the common 4-D case (T, C, H, W).
    Scalar& at(int a, int b, int c, int d) { return data_[offset(a, b, c, d)]; }
    const Scalar& at(int a, int b, int c, int d) const { return data_[offset(a, b, c, d)]; }

    std::size_t offset(int a, int b, int c, int d) const {
        return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
    }

    void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

    void reshape(std::vector<int> shape) {
        require(count(shape) == data_.size(), ErrorKind::Shape, "reshape changes element count");
        shape_ = std::move(shape);
    }

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    template <typename Other>
    Tensor<Other> cast() const {
        return Tensor<Other>(shape_, std::vector<Other>(data_.begin(), data_.end()));
    }

    static std::size_t count(const std::vector<int>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
    }

    friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

private:
    std::vector<int> shape_;
    std::vector<Scalar> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

std::string shape_string(const std::vector<int>& shape);

}  // namespace pavad
