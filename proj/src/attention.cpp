// SPDX-License-Identifier: Apache-2.0
#include "attnquant/attention.hpp"

#include <cmath>
#include <string>

namespace attnquant {

const char* to_string(AttentionKind k) {
    switch (k) {
        case AttentionKind::self_attention: return "self_attention";
        case AttentionKind::token_to_image: return "token_to_image";
        case AttentionKind::image_to_token: return "image_to_token";
    }
    return "self_attention";
}

AttentionKind attention_kind_from_string(const std::string& s) {
    if (s == "self_attention") return AttentionKind::self_attention;
    if (s == "token_to_image") return AttentionKind::token_to_image;
    if (s == "image_to_token") return AttentionKind::image_to_token;
    throw DomainError("unknown attention kind: " + s);
}

const char* to_string(Regime r) {
    switch (r) {
        case Regime::normal_key: return "normal_key";
        case Regime::bimodal_key: return "bimodal_key";
        case Regime::softmax_smooth: return "softmax_smooth";
        case Regime::softmax_peaked: return "softmax_peaked";
    }
    return "normal_key";
}

Regime regime_from_string(const std::string& s) {
    if (s == "normal_key") return Regime::normal_key;
    if (s == "bimodal_key") return Regime::bimodal_key;
    if (s == "softmax_smooth") return Regime::softmax_smooth;
    if (s == "softmax_peaked") return Regime::softmax_peaked;
    throw DomainError("unknown regime: " + s);
}

AttentionTaps forward(const AttentionBlockParams& block, const Tensor& x_q, const Tensor& x_k,
                      const Tensor& x_v) {
    AttentionTaps taps;
    taps.q_act = add_row_bias(matmul(x_q, block.w_q), block.b_q);
    taps.k_act = add_row_bias(matmul(x_k, block.w_k), block.b_k);
    const Tensor v = add_row_bias(matmul(x_v, block.w_v), block.b_v);
    const float inv_sqrt_n = static_cast<float>(1.0 / std::sqrt(double(block.channels())));
    taps.scores = scale(matmul(taps.q_act, transpose(taps.k_act)), inv_sqrt_n);
    taps.attn = softmax_rows(taps.scores);
    taps.output = matmul(taps.attn, v);
    return taps;
}

Tensor gen_normal_tensor(std::size_t rows, std::size_t cols, CounterRng& rng) {
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.next_normal());
    return t;
}

namespace {

// Linear weight with entries N(0, spread^2 / m) so the output channels have
// spread ~ `spread` on standard-normal inputs.
Tensor gen_weight(std::size_t m, std::size_t n, double spread, CounterRng& rng) {
    Tensor w({m, n});
    const double sigma = spread / std::sqrt(static_cast<double>(m));
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<float>(sigma * rng.next_normal());
    }
    return w;
}

}  // namespace

BimodalBlock gen_bimodal_block(const SyntheticSpec& spec) {
    if (spec.regime != Regime::bimodal_key) throw DomainError("spec regime must be bimodal_key");
    if (!(spec.width > 0.0)) throw DomainError("peak width must be positive");
    if (spec.frac_positive < 0.0 || spec.frac_positive > 1.0) {
        throw DomainError("frac_positive must lie in [0, 1]");
    }
    CounterRng rng(spec.seed);

    BimodalBlock out;
    out.block.kind = spec.kind;
    out.block.w_q = gen_weight(spec.dim, spec.channels, 1.0, rng);
    out.block.w_k = gen_weight(spec.dim, spec.channels, spec.width, rng);
    out.block.w_v = gen_weight(spec.dim, spec.channels, 1.0, rng);
    out.block.b_q = Tensor({spec.channels});
    out.block.b_v = Tensor({spec.channels});

    Tensor b_k({spec.channels});
    out.true_signs.resize(spec.channels);
    for (std::size_t j = 0; j < spec.channels; ++j) {
        const bool positive = rng.next_unit() <= spec.frac_positive;
        out.true_signs[j] = positive ? 1 : -1;
        b_k[j] = static_cast<float>((positive ? 1.0 : -1.0) * spec.center);
    }
    out.block.b_k = b_k;

    out.x_k = gen_normal_tensor(spec.tokens_k, spec.dim, rng);
    return out;
}

AttentionBlockParams gen_normal_block(const SyntheticSpec& spec) {
    CounterRng rng(spec.seed);
    AttentionBlockParams block;
    block.kind = spec.kind;
    block.w_q = gen_weight(spec.dim, spec.channels, 1.0, rng);
    block.w_k = gen_weight(spec.dim, spec.channels, 1.0, rng);
    block.w_v = gen_weight(spec.dim, spec.channels, 1.0, rng);
    block.b_q = Tensor({spec.channels});
    block.b_k = Tensor({spec.channels});
    block.b_v = Tensor({spec.channels});
    return block;
}

Tensor gen_post_softmax(const SyntheticSpec& spec) {
    double sigma = 0.0;
    switch (spec.regime) {
        case Regime::softmax_smooth: sigma = 0.5; break;
        case Regime::softmax_peaked: sigma = 2.0; break;
        default: throw DomainError("spec regime must be a softmax regime");
    }
    CounterRng rng(spec.seed);
    Tensor logits({spec.tokens_q, spec.tokens_k});
    for (std::size_t i = 0; i < logits.size(); ++i) {
        logits[i] = static_cast<float>(sigma * rng.next_normal());
    }
    return softmax_rows(logits);
}

}  // namespace attnquant
