// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "attnquant/tensor.hpp"

namespace attnquant {

/// Asymmetric affine quantizer: code = clamp(round(x/s) + z, 0, 2^k - 1),
/// value = s * (code - z). Rounding is half-to-even throughout.
struct UniformParams {
    float scale = 1.0f;
    int zero_point = 0;
    int bits = 8;
};

/// One UniformParams per output channel (weight columns).
struct PerChannelUniformParams {
    std::vector<UniformParams> channels;
    int bits = 8;
};

/// Power-of-two quantizer for post-softmax values: code = round(-log2(x/s)),
/// value = s * 2^-code.
struct Log2Params {
    float scale = 1.0f;
    int bits = 4;
};

/// Logarithmic quantizer with base 2^(1/tau). tau = 1 reduces exactly to the
/// Log2 quantizer; larger tau refines high values at the cost of range.
struct AgqParams {
    float scale = 1.0f;
    int bits = 4;
    int tau = 1;
};

/// Lookup table for the integer execution path: entries[r][u] = 2^(r/tau)*u
/// for residue r in [0, tau) and shifted value u in [0, 2^bits). The table
/// for a smaller tau' dividing tau embeds at stride tau/tau'.
class AgqLut {
public:
    AgqLut(int tau, int bits, std::vector<float> entries)
        : tau_(tau), bits_(bits), entries_(std::move(entries)) {}

    int tau() const { return tau_; }
    int bits() const { return bits_; }
    std::size_t size() const { return entries_.size(); }
    float at(int residue, std::uint32_t shifted) const {
        return entries_[static_cast<std::size_t>(residue) << bits_ | shifted];
    }
    const std::vector<float>& entries() const { return entries_; }

private:
    int tau_;
    int bits_;
    std::vector<float> entries_;
};

enum class LutMode {
    exact,     // shifted value keeps fractional bits; matches the float path
    hardware,  // truncating integer right shift, as an accelerator would do
};

double round_half_even(double x);

/// Fit scale/zero-point to an observed range. The range is first extended to
/// include zero so the zero level is exactly representable; a fully
/// degenerate range at zero is widened by machine epsilon.
UniformParams uniform_params_from_range(double lo, double hi, int bits);

IntTensor uniform_quant(const Tensor& x, const UniformParams& p);
Tensor uniform_dequant(const IntTensor& q, const UniformParams& p);

/// Min/max fit per output channel (column) of a rank-2 weight tensor.
PerChannelUniformParams per_channel_params_from(const Tensor& w, int bits);
IntTensor per_channel_quant(const Tensor& w, const PerChannelUniformParams& p);
Tensor per_channel_dequant(const IntTensor& q, const PerChannelUniformParams& p);

// Non-positive inputs map to the largest code (smallest magnitude) in both
// logarithmic quantizers; clamping happens after rounding.
IntTensor log2_quant(const Tensor& x, const Log2Params& p);
Tensor log2_dequant(const IntTensor& q, const Log2Params& p);

IntTensor agq_quant(const Tensor& a, const AgqParams& p);
Tensor agq_dequant(const IntTensor& q, const AgqParams& p);

/// Dequantized value of one code, in double: scale * 2^(-code/tau).
double agq_dequant_value(std::uint32_t code, double scale, int tau);

/// Split -code/tau into an integer shift and a fractional residue:
/// shift = ceil(code/tau), residue = (-code) mod tau in [0, tau-1], so that
/// -code/tau = -shift + residue/tau.
std::pair<int, int> agq_decompose(int code, int tau);

AgqLut build_lut(int tau, int bits);

/// Product of AGQ attention codes and uniform value codes through the LUT:
/// each term is s_a * s_v * lut[(-a) % tau][(v - v_zero) >> ceil(a/tau)].
/// `exact` keeps the shifted value's fractional bits and must match the
/// float dequant path; `hardware` truncates like an integer datapath.
Tensor agq_matmul_lut(const IntTensor& a_q, const IntTensor& v_q, const AgqLut& lut, float s_a,
                      float s_v, int v_zero, LutMode mode);

}  // namespace attnquant
