#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dstlab {

// Dense row-major tensor of 64-bit floats. Rank 0 (scalar), 1 (vector) and
// 2 (matrix) are the only ranks the rest of the library produces.
class Tensor {
public:
    Tensor() = default;

    static Tensor scalar(double v) {
        Tensor t;
        t.shape_ = {};
        t.data_ = {v};
        return t;
    }

    static Tensor zeros(std::vector<std::int64_t> shape) {
        Tensor t;
        t.data_.assign(static_cast<std::size_t>(checked_size(shape)), 0.0);
        t.shape_ = std::move(shape);
        return t;
    }

    static Tensor from_vector(std::vector<double> v) {
        if (v.empty()) {
            throw std::invalid_argument("Tensor: vector must be non-empty");
        }
        Tensor t;
        t.shape_ = {static_cast<std::int64_t>(v.size())};
        t.data_ = std::move(v);
        return t;
    }

    static Tensor from_matrix(std::int64_t rows, std::int64_t cols, std::vector<double> v) {
        if (rows <= 0 || cols <= 0 || v.size() != static_cast<std::size_t>(rows * cols)) {
            throw std::invalid_argument("Tensor: matrix data does not match rows*cols");
        }
        Tensor t;
        t.shape_ = {rows, cols};
        t.data_ = std::move(v);
        return t;
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    std::int64_t rows() const { return rank() >= 1 ? shape_[0] : 1; }
    std::int64_t cols() const { return rank() == 2 ? shape_[1] : 1; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> span() { return {data_.data(), data_.size()}; }
    std::span<const double> span() const { return {data_.data(), data_.size()}; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::int64_t r, std::int64_t c) {
        return data_[static_cast<std::size_t>(r * cols() + c)];
    }
    double at(std::int64_t r, std::int64_t c) const {
        return data_[static_cast<std::size_t>(r * cols() + c)];
    }

    double as_scalar() const {
        if (data_.size() != 1) {
            throw std::invalid_argument("Tensor: not a scalar");
        }
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool bit_equal(const Tensor& o) const {
        return shape_ == o.shape_ && data_ == o.data_;
    }

    void fill(double v) { data_.assign(data_.size(), v); }

private:
    static std::int64_t checked_size(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (std::int64_t d : shape) {
            if (d <= 0) {
                throw std::invalid_argument("Tensor: shape entries must be positive");
            }
            n *= d;
        }
        return n;
    }

    std::vector<std::int64_t> shape_;
    std::vector<double> data_;
};

}  // namespace dstlab
