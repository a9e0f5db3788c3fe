// SPDX-License-Identifier: Apache-2.0
#include "attnquant/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace attnquant {

namespace {

void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected a rank-2 tensor");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul lhs");
    require_rank2(b, "matmul rhs");
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions disagree");

    const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
    Tensor out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                acc += static_cast<double>(a(i, t)) * static_cast<double>(b(t, j));
            }
            out(i, j) = static_cast<float>(acc);
        }
    }
    return out;
}

Tensor transpose(const Tensor& m) {
    require_rank2(m, "transpose");
    Tensor out({m.cols(), m.rows()});
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

Tensor channel_mean(const Tensor& m) {
    require_rank2(m, "channel_mean");
    if (m.rows() == 0) throw DomainError("channel_mean: zero rows");
    Tensor out({m.cols()});
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) acc += m(i, j);
        out[j] = static_cast<float>(acc / static_cast<double>(m.rows()));
    }
    return out;
}

double frobenius_sq(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("frobenius_sq: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

std::pair<float, float> minmax(const Tensor& x) {
    if (x.size() == 0) throw DomainError("minmax: empty input");
    float lo = x[0], hi = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
    }
    return {lo, hi};
}

Tensor col_scale(const Tensor& m, const Tensor& v) {
    require_rank2(m, "col_scale");
    if (v.rank() != 1 || v.size() != m.cols())
        throw ShapeError("col_scale: vector length must equal column count");
    Tensor out = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) * v[j];
    return out;
}

Tensor softmax_rows(const Tensor& m) {
    require_rank2(m, "softmax_rows");
    Tensor out({m.rows(), m.cols()});
    std::vector<double> e(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m.cols(); ++j) hi = std::max(hi, static_cast<double>(m(i, j)));
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            e[j] = std::exp(static_cast<double>(m(i, j)) - hi);
            sum += e[j];
        }
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = static_cast<float>(e[j] / sum);
    }
    return out;
}

Tensor add_row_bias(const Tensor& m, const Tensor& bias) {
    require_rank2(m, "add_row_bias");
    if (bias.rank() != 1 || bias.size() != m.cols())
        throw ShapeError("add_row_bias: bias length must equal column count");
    Tensor out = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) + bias[j];
    return out;
}

Tensor scale(const Tensor& m, float factor) {
    Tensor out = m;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] * factor;
    return out;
}

}  // namespace attnquant
