// SPDX-License-Identifier: Apache-2.0
#include "attnquant/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace attnquant {

namespace {

void check_bits(int bits) {
    if (bits < 2 || bits > 8) throw DomainError("bit-width must be in [2, 8]");
}

std::uint32_t max_code(int bits) { return (1u << bits) - 1u; }

std::uint8_t clamp_code(double q, int bits) {
    const double hi = static_cast<double>(max_code(bits));
    return static_cast<std::uint8_t>(std::min(std::max(q, 0.0), hi));
}

// Shared log-family encoder; log2_quant is the tau = 1 instance, which keeps
// the two quantizers bit-identical by construction.
IntTensor log_family_quant(const Tensor& x, double scale, int bits, int tau) {
    check_bits(bits);
    if (!(scale > 0.0)) throw DomainError("log quantizer scale must be positive");
    IntTensor out(x.shape(), bits);
    const std::uint8_t floor_code = static_cast<std::uint8_t>(max_code(bits));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        if (!(v > 0.0)) {
            out[i] = floor_code;
            continue;
        }
        const double q = round_half_even(-static_cast<double>(tau) * std::log2(v / scale));
        out[i] = clamp_code(q, bits);
    }
    return out;
}

Tensor log_family_dequant(const IntTensor& q, double scale, int tau) {
    Tensor out(q.shape());
    for (std::size_t i = 0; i < q.size(); ++i) {
        out[i] = static_cast<float>(agq_dequant_value(q[i], scale, tau));
    }
    return out;
}

}  // namespace

double round_half_even(double x) { return std::nearbyint(x); }

UniformParams uniform_params_from_range(double lo, double hi, int bits) {
    check_bits(bits);
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
        throw DomainError("quantization range must be finite");
    }
    if (hi < lo) throw DomainError("quantization range must satisfy max >= min");

    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    if (hi == lo) {  // only possible when the observed range is exactly {0}
        const double eps = std::numeric_limits<float>::epsilon();
        lo -= eps;
        hi += eps;
    }

    const double levels = static_cast<double>(max_code(bits));
    UniformParams p;
    p.bits = bits;
    p.scale = static_cast<float>((hi - lo) / levels);
    const double z = round_half_even(-lo * levels / (hi - lo));
    p.zero_point = static_cast<int>(std::min(std::max(z, 0.0), levels));
    return p;
}

IntTensor uniform_quant(const Tensor& x, const UniformParams& p) {
    check_bits(p.bits);
    if (!(p.scale > 0.0f)) throw DomainError("uniform scale must be positive");
    IntTensor out(x.shape(), p.bits);
    const double s = p.scale;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double q = round_half_even(static_cast<double>(x[i]) / s) + p.zero_point;
        out[i] = clamp_code(q, p.bits);
    }
    return out;
}

Tensor uniform_dequant(const IntTensor& q, const UniformParams& p) {
    Tensor out(q.shape());
    const double s = p.scale;
    for (std::size_t i = 0; i < q.size(); ++i) {
        out[i] = static_cast<float>(s * (static_cast<int>(q[i]) - p.zero_point));
    }
    return out;
}

PerChannelUniformParams per_channel_params_from(const Tensor& w, int bits) {
    if (w.rank() != 2) throw ShapeError("per-channel fit expects a rank-2 weight");
    if (w.rows() == 0) throw DomainError("per-channel fit: empty weight");
    PerChannelUniformParams p;
    p.bits = bits;
    p.channels.reserve(w.cols());
    for (std::size_t j = 0; j < w.cols(); ++j) {
        float lo = w(0, j), hi = w(0, j);
        for (std::size_t i = 1; i < w.rows(); ++i) {
            lo = std::min(lo, w(i, j));
            hi = std::max(hi, w(i, j));
        }
        p.channels.push_back(uniform_params_from_range(lo, hi, bits));
    }
    return p;
}

IntTensor per_channel_quant(const Tensor& w, const PerChannelUniformParams& p) {
    if (w.rank() != 2 || w.cols() != p.channels.size())
        throw ShapeError("per-channel quant: channel count mismatch");
    IntTensor out(w.shape(), p.bits);
    for (std::size_t j = 0; j < w.cols(); ++j) {
        const UniformParams& cp = p.channels[j];
        const double s = cp.scale;
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double q = round_half_even(static_cast<double>(w(i, j)) / s) + cp.zero_point;
            out(i, j) = clamp_code(q, p.bits);
        }
    }
    return out;
}

Tensor per_channel_dequant(const IntTensor& q, const PerChannelUniformParams& p) {
    if (q.rank() != 2 || q.cols() != p.channels.size())
        throw ShapeError("per-channel dequant: channel count mismatch");
    Tensor out(q.shape());
    for (std::size_t j = 0; j < q.cols(); ++j) {
        const UniformParams& cp = p.channels[j];
        const double s = cp.scale;
        for (std::size_t i = 0; i < q.rows(); ++i) {
            out(i, j) = static_cast<float>(s * (static_cast<int>(q(i, j)) - cp.zero_point));
        }
    }
    return out;
}

IntTensor log2_quant(const Tensor& x, const Log2Params& p) {
    return log_family_quant(x, p.scale, p.bits, 1);
}

Tensor log2_dequant(const IntTensor& q, const Log2Params& p) {
    return log_family_dequant(q, p.scale, 1);
}

IntTensor agq_quant(const Tensor& a, const AgqParams& p) {
    if (p.tau < 1) throw DomainError("tau must be >= 1");
    return log_family_quant(a, p.scale, p.bits, p.tau);
}

Tensor agq_dequant(const IntTensor& q, const AgqParams& p) {
    if (p.tau < 1) throw DomainError("tau must be >= 1");
    return log_family_dequant(q, p.scale, p.tau);
}

double agq_dequant_value(std::uint32_t code, double scale, int tau) {
    return scale * std::exp2(-static_cast<double>(code) / static_cast<double>(tau));
}

std::pair<int, int> agq_decompose(int code, int tau) {
    if (code < 0 || tau < 1) throw DomainError("agq_decompose: code >= 0 and tau >= 1 required");
    const int shift = (code + tau - 1) / tau;
    const int residue = ((-code) % tau + tau) % tau;
    return {shift, residue};
}

AgqLut build_lut(int tau, int bits) {
    check_bits(bits);
    if (tau < 1 || (tau & (tau - 1)) != 0) throw DomainError("tau must be a power of two");
    const std::size_t width = std::size_t{1} << bits;
    std::vector<float> entries(static_cast<std::size_t>(tau) * width);
    for (int r = 0; r < tau; ++r) {
        const double factor = std::exp2(static_cast<double>(r) / static_cast<double>(tau));
        for (std::size_t u = 0; u < width; ++u) {
            entries[static_cast<std::size_t>(r) * width + u] =
                static_cast<float>(factor * static_cast<double>(u));
        }
    }
    return AgqLut(tau, bits, std::move(entries));
}

Tensor agq_matmul_lut(const IntTensor& a_q, const IntTensor& v_q, const AgqLut& lut, float s_a,
                      float s_v, int v_zero, LutMode mode) {
    if (a_q.rank() != 2 || v_q.rank() != 2) throw ShapeError("lut matmul expects rank-2 inputs");
    if (a_q.cols() != v_q.rows()) throw ShapeError("lut matmul: inner dimensions disagree");
    if (a_q.bits() > lut.bits() || v_q.bits() != lut.bits())
        throw DomainError("lut matmul: bit-width does not match the table");

    const int tau = lut.tau();
    const double s = static_cast<double>(s_a) * static_cast<double>(s_v);
    const std::size_t r = a_q.rows(), k = a_q.cols(), c = v_q.cols();
    Tensor out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                const auto [shift, residue] = agq_decompose(a_q(i, t), tau);
                const int centered = static_cast<int>(v_q(t, j)) - v_zero;
                if (mode == LutMode::exact) {
                    // lut[r][u] is linear in u, so a fractional shifted value
                    // is lut[r][1] * v * 2^-shift.
                    acc += static_cast<double>(lut.at(residue, 1)) *
                           std::ldexp(static_cast<double>(centered), -shift);
                } else {
                    const std::uint32_t mag = static_cast<std::uint32_t>(std::abs(centered));
                    const std::uint32_t shifted = shift >= 31 ? 0u : mag >> shift;
                    const double term = lut.at(residue, shifted);
                    acc += centered < 0 ? -term : term;
                }
            }
            out(i, j) = static_cast<float>(s * acc);
        }
    }
    return out;
}

}  // namespace attnquant
