// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "attnquant/attention.hpp"
#include "attnquant/bimodal.hpp"

using namespace attnquant;

namespace {

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

AttentionBlockParams zero_block(std::size_t m, std::size_t n) {
    AttentionBlockParams b;
    b.w_q = Tensor({m, n});
    b.w_k = Tensor({m, n});
    b.w_v = Tensor({m, n});
    b.b_q = Tensor({n});
    b.b_k = Tensor({n});
    b.b_v = Tensor({n});
    return b;
}

double frac_above(const Tensor& t, double threshold) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < t.size(); ++i) count += t[i] > threshold;
    return static_cast<double>(count) / static_cast<double>(t.size());
}

}  // namespace

TEST_SUITE_BEGIN("attention");

TEST_CASE("zero weights give uniform attention") {
    const std::size_t tokens = 6;
    CounterRng rng(1);
    const Tensor x = gen_normal_tensor(tokens, 4, rng);
    const AttentionTaps taps = forward(zero_block(4, 4), x, x, x);
    for (std::size_t i = 0; i < taps.attn.size(); ++i) {
        CHECK(taps.attn[i] == doctest::Approx(1.0 / tokens));
    }
}

TEST_CASE("one-by-one identity case") {
    AttentionBlockParams b = zero_block(1, 1);
    b.w_q(0, 0) = 1.0f;
    b.w_k(0, 0) = 1.0f;
    b.w_v(0, 0) = 1.0f;
    const Tensor x({1, 1}, {1.0f});
    const AttentionTaps taps = forward(b, x, x, x);
    CHECK(taps.scores(0, 0) == doctest::Approx(1.0f));
    CHECK(taps.attn(0, 0) == doctest::Approx(1.0f));
    CHECK(taps.output(0, 0) == doctest::Approx(1.0f));
}

TEST_CASE("taps agree with an independent recomputation") {
    SyntheticSpec spec;
    spec.seed = 12;
    spec.regime = Regime::bimodal_key;
    spec.tokens_q = 10;
    spec.tokens_k = 14;
    spec.dim = 8;
    spec.channels = 6;
    const BimodalBlock bb = gen_bimodal_block(spec);
    CounterRng rng(13);
    const Tensor x_q = gen_normal_tensor(10, 8, rng);

    const AttentionTaps taps = forward(bb.block, x_q, bb.x_k, bb.x_k);

    const Tensor q = add_row_bias(matmul(x_q, bb.block.w_q), bb.block.b_q);
    const Tensor k = add_row_bias(matmul(bb.x_k, bb.block.w_k), bb.block.b_k);
    const Tensor v = add_row_bias(matmul(bb.x_k, bb.block.w_v), bb.block.b_v);
    const Tensor scores = scale(matmul(q, transpose(k)), 1.0f / std::sqrt(6.0f));
    const Tensor attn = softmax_rows(scores);
    const Tensor out = matmul(attn, v);

    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(taps.output[i] == doctest::Approx(out[i]).epsilon(1e-6));
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        CHECK(taps.scores[i] == doctest::Approx(scores[i]).epsilon(1e-6));
    }
    CHECK(forward(bb.block, x_q, bb.x_k, bb.x_k).attn.rows() == 10);
    CHECK_THROWS_AS(forward(bb.block, Tensor({3, 5}), bb.x_k, bb.x_k), ShapeError);
}

TEST_CASE("generation is deterministic for a fixed spec") {
    SyntheticSpec spec;
    spec.seed = 2024;
    spec.regime = Regime::bimodal_key;
    const BimodalBlock a = gen_bimodal_block(spec);
    const BimodalBlock b = gen_bimodal_block(spec);
    CHECK(bit_equal(a.block.w_k, b.block.w_k));
    CHECK(bit_equal(a.block.b_k, b.block.b_k));
    CHECK(bit_equal(a.x_k, b.x_k));
    CHECK(a.true_signs == b.true_signs);

    spec.regime = Regime::softmax_peaked;
    spec.tokens_k = 8;
    CHECK(bit_equal(gen_post_softmax(spec), gen_post_softmax(spec)));
}

TEST_CASE("two-peak generator places channels on their labelled peak") {
    SyntheticSpec spec;
    spec.seed = 5;
    spec.regime = Regime::bimodal_key;
    spec.tokens_k = 256;
    spec.dim = 32;
    spec.channels = 64;
    spec.center = 8.0;
    spec.width = 1.0;
    const BimodalBlock bb = gen_bimodal_block(spec);
    const Tensor k = add_row_bias(matmul(bb.x_k, bb.block.w_k), bb.block.b_k);
    const Tensor means = channel_mean(k);
    for (std::size_t j = 0; j < means.size(); ++j) {
        const double target = bb.true_signs[j] * spec.center;
        CHECK(std::abs(means[j] - target) <= 3.0 * spec.width);
        CHECK((means[j] >= 0.0f ? 1 : -1) == bb.true_signs[j]);
    }
}

TEST_CASE("single-peak generator settings are not flagged as bimodal") {
    SyntheticSpec spec;
    spec.seed = 6;
    spec.regime = Regime::bimodal_key;
    spec.tokens_k = 256;
    spec.dim = 32;
    spec.channels = 32;
    spec.frac_positive = 1.0;  // every channel on the positive peak
    const BimodalBlock bb = gen_bimodal_block(spec);
    for (std::int8_t s : bb.true_signs) CHECK(s == 1);
    const Tensor k = add_row_bias(matmul(bb.x_k, bb.block.w_k), bb.block.b_k);
    const HistogramConfig cfg;
    CHECK_FALSE(discriminate_histogram(build_histogram(k, cfg.n_bins), cfg).is_bimodal);
}

TEST_CASE("positive-channel share follows the requested fraction") {
    double mean_frac = 0.0;
    const int trials = 8;
    for (int t = 0; t < trials; ++t) {
        SyntheticSpec spec;
        spec.seed = 900 + t;
        spec.regime = Regime::bimodal_key;
        spec.channels = 512;
        spec.frac_positive = 0.461;
        const BimodalBlock bb = gen_bimodal_block(spec);
        std::size_t pos = 0;
        for (std::int8_t s : bb.true_signs) pos += s > 0;
        mean_frac += double(pos) / 512.0;
    }
    mean_frac /= trials;
    CHECK(std::abs(mean_frac - 0.461) <= 0.02);
}

TEST_CASE("smooth and peaked softmax regimes hit their tails") {
    SyntheticSpec spec;
    spec.seed = 7;
    spec.tokens_q = 64;

    spec.regime = Regime::softmax_smooth;
    spec.tokens_k = 4096;
    const Tensor smooth = gen_post_softmax(spec);
    CHECK(frac_above(smooth, 0.01) <= 0.02);

    spec.regime = Regime::softmax_peaked;
    spec.tokens_k = 8;
    const Tensor peaked = gen_post_softmax(spec);
    CHECK(frac_above(peaked, 0.01) >= 0.5);

    for (const Tensor* t : {&smooth, &peaked}) {
        for (std::size_t i = 0; i < t->rows(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < t->cols(); ++j) sum += (*t)(i, j);
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("attention is unchanged end to end by the sign fold") {
    SyntheticSpec spec;
    spec.seed = 14;
    spec.regime = Regime::bimodal_key;
    spec.tokens_q = 24;
    spec.tokens_k = 48;
    spec.dim = 16;
    spec.channels = 16;
    const BimodalBlock bb = gen_bimodal_block(spec);
    CounterRng rng(15);
    const Tensor x_q = gen_normal_tensor(24, 16, rng);

    const AttentionTaps base = forward(bb.block, x_q, bb.x_k, bb.x_k);
    const SignFactor g = compute_gamma(base.k_act);
    const AttentionTaps folded = forward(apply_big(bb.block, g), x_q, bb.x_k, bb.x_k);

    for (std::size_t i = 0; i < base.attn.size(); ++i) {
        CHECK(std::abs(base.attn[i] - folded.attn[i]) <= 1e-5f);
    }
    const double rel = std::sqrt(frobenius_sq(base.output, folded.output)) /
                       (std::sqrt(frobenius_sq(base.output, Tensor(base.output.shape()))) + 1e-30);
    CHECK(rel <= 1e-5);
}

TEST_CASE("generated keys drive the discriminator as intended") {
    const HistogramConfig cfg;
    for (std::uint64_t seed = 40; seed < 46; ++seed) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.regime = Regime::bimodal_key;
        spec.tokens_k = 256;
        spec.dim = 32;
        spec.channels = 32;
        spec.center = 6.0;  // detection bound: center >= 6 * width
        spec.width = 1.0;
        const BimodalBlock bb = gen_bimodal_block(spec);
        const Tensor k = add_row_bias(matmul(bb.x_k, bb.block.w_k), bb.block.b_k);
        CHECK(discriminate_histogram(build_histogram(k, cfg.n_bins), cfg).is_bimodal);

        spec.regime = Regime::normal_key;
        const AttentionBlockParams nb = gen_normal_block(spec);
        CounterRng rng(seed + 1000);
        const Tensor x = gen_normal_tensor(256, 32, rng);
        const Tensor nk = add_row_bias(matmul(x, nb.w_k), nb.b_k);
        CHECK_FALSE(discriminate_histogram(build_histogram(nk, cfg.n_bins), cfg).is_bimodal);
    }
}

TEST_SUITE_END();
