// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "attnquant/errors.hpp"

namespace attnquant {

/// Dense row-major float32 tensor. Values are immutable by convention once
/// an operation has produced them; operations return new tensors.
class Tensor {
public:
    Tensor() : shape_{}, data_(1, 0.0f) {}  // rank-0 scalar zero

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(volume(shape_), 0.0f) {}

    Tensor(std::vector<std::size_t> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != volume(shape_)) {
            throw ShapeError("tensor data length does not match shape volume");
        }
    }

    static Tensor scalar(float v) {
        Tensor t;
        t.data_[0] = v;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    std::size_t rows() const { return dim_at(0); }
    std::size_t cols() const { return dim_at(1); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
    float& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    static std::size_t volume(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

private:
    std::size_t dim_at(std::size_t i) const {
        if (i >= shape_.size()) throw ShapeError("tensor rank too small");
        return shape_[i];
    }

    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

/// Unsigned integer codes produced by a quantizer; every entry fits in
/// `bits` (2..8), so storage is one byte per element.
class IntTensor {
public:
    IntTensor() : shape_{}, data_(1, 0), bits_(8) {}

    IntTensor(std::vector<std::size_t> shape, int bits)
        : shape_(std::move(shape)), data_(Tensor::volume(shape_), 0), bits_(bits) {
        check_bits();
    }

    IntTensor(std::vector<std::size_t> shape, std::vector<std::uint8_t> data, int bits)
        : shape_(std::move(shape)), data_(std::move(data)), bits_(bits) {
        check_bits();
        if (data_.size() != Tensor::volume(shape_)) {
            throw ShapeError("int tensor data length does not match shape volume");
        }
        const std::uint32_t limit = (1u << bits_) - 1u;
        for (std::uint8_t v : data_) {
            if (v > limit) throw DomainError("int tensor entry exceeds bit range");
        }
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    int bits() const { return bits_; }

    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }

    std::uint8_t* data() { return data_.data(); }
    const std::uint8_t* data() const { return data_.data(); }
    const std::vector<std::uint8_t>& values() const { return data_; }

    std::uint8_t operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
    std::uint8_t& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
    std::uint8_t operator[](std::size_t i) const { return data_[i]; }
    std::uint8_t& operator[](std::size_t i) { return data_[i]; }

private:
    void check_bits() const {
        if (bits_ < 2 || bits_ > 8) throw DomainError("bit-width must be in [2, 8]");
    }

    std::vector<std::size_t> shape_;
    std::vector<std::uint8_t> data_;
    int bits_;
};

// Reductions accumulate in double with a fixed row-major order, so results
// are reproducible run to run.

/// Standard rank-2 product; shapes (r,k) x (k,c) -> (r,c).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Rank-2 transpose.
Tensor transpose(const Tensor& m);

/// Arithmetic mean of each column of a rank-2 tensor.
Tensor channel_mean(const Tensor& m);

/// Sum of squared elementwise differences.
double frobenius_sq(const Tensor& a, const Tensor& b);

/// (minimum, maximum) over all entries.
std::pair<float, float> minmax(const Tensor& x);

/// Multiply column j of a rank-2 tensor by v[j].
Tensor col_scale(const Tensor& m, const Tensor& v);

/// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(const Tensor& m);

/// Add a length-cols(m) bias vector to every row.
Tensor add_row_bias(const Tensor& m, const Tensor& bias);

/// Multiply every entry by a scalar.
Tensor scale(const Tensor& m, float factor);

}  // namespace attnquant
