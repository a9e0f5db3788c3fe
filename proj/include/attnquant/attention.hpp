// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnquant/rng.hpp"
#include "attnquant/tensor.hpp"

namespace attnquant {

enum class AttentionKind : std::uint8_t {
    self_attention = 0,
    token_to_image = 1,
    image_to_token = 2,
};

const char* to_string(AttentionKind k);
AttentionKind attention_kind_from_string(const std::string& s);

/// One single-head attention block: three linears of shape (dim m -> channels n).
struct AttentionBlockParams {
    Tensor w_q, w_k, w_v;  // m x n
    Tensor b_q, b_k, b_v;  // n
    AttentionKind kind = AttentionKind::self_attention;

    std::size_t dim() const { return w_q.rows(); }
    std::size_t channels() const { return w_q.cols(); }
};

/// Intermediate activations of one forward pass.
struct AttentionTaps {
    Tensor q_act;   // post query linear
    Tensor k_act;   // post key linear
    Tensor scores;  // QK^T / sqrt(n)
    Tensor attn;    // row softmax of scores
    Tensor output;  // attn * V
};

enum class Regime : std::uint8_t {
    normal_key = 0,
    bimodal_key = 1,
    softmax_smooth = 2,
    softmax_peaked = 3,
};

const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// Seeded recipe for the synthetic generators. All constants are explicit so
/// outputs are bit-reproducible for a given spec.
struct SyntheticSpec {
    std::uint64_t seed = 0;
    std::size_t tokens_q = 64;
    std::size_t tokens_k = 64;
    std::size_t dim = 32;       // m
    std::size_t channels = 32;  // n
    Regime regime = Regime::normal_key;
    AttentionKind kind = AttentionKind::self_attention;
    double center = 8.0;         // bimodal peak position
    double width = 1.0;          // bimodal peak spread
    double frac_positive = 0.5;  // share of channels on the positive peak
};

struct BimodalBlock {
    AttentionBlockParams block;
    Tensor x_k;  // inputs whose key activations exhibit the two peaks
    std::vector<std::int8_t> true_signs;
};

/// Q = X_q W_q + b_q, K = X_k W_k + b_k, V = X_v W_v + b_v,
/// scores = QK^T / sqrt(n), attn = softmax(scores), output = attn V.
AttentionTaps forward(const AttentionBlockParams& block, const Tensor& x_q, const Tensor& x_k,
                      const Tensor& x_v);

/// Standard-normal tensor from the counter RNG.
Tensor gen_normal_tensor(std::size_t rows, std::size_t cols, CounterRng& rng);

/// Block whose key channels each sit on one of two peaks at +-center: the key
/// bias carries the peak, the key weights only add spread ~ width. Returns
/// the per-channel ground-truth signs for test oracles.
BimodalBlock gen_bimodal_block(const SyntheticSpec& spec);

/// Block with zero biases and unit-variance activations everywhere.
AttentionBlockParams gen_normal_block(const SyntheticSpec& spec);

/// Post-softmax tensor (tokens_q x tokens_k). softmax_smooth draws
/// low-variance logits (sigma 0.5) so nearly all probabilities are tiny;
/// softmax_peaked draws high-variance logits (sigma 2) so most entries
/// stay above 0.01.
Tensor gen_post_softmax(const SyntheticSpec& spec);

}  // namespace attnquant
