// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "attnquant/quant.hpp"
#include "attnquant/rng.hpp"

using namespace attnquant;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed, double lo, double hi) {
    CounterRng rng(seed);
    Tensor t({r, c});
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(lo + (hi - lo) * rng.next_unit());
    }
    return t;
}

Tensor random_unit_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
    CounterRng rng(seed);
    Tensor t({r, c});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.next_unit());
    return t;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_SUITE_BEGIN("quant");

TEST_CASE("uniform params from range") {
    const UniformParams a = uniform_params_from_range(0.0, 3.0, 2);
    CHECK(a.scale == doctest::Approx(1.0f));
    CHECK(a.zero_point == 0);

    // round(127.5) resolves to the even neighbor 128
    const UniformParams b = uniform_params_from_range(-1.0, 1.0, 8);
    CHECK(b.scale == doctest::Approx(2.0 / 255.0));
    CHECK(b.zero_point == 128);

    CHECK_THROWS_AS(uniform_params_from_range(1.0, 0.0, 8), DomainError);
    CHECK_THROWS_AS(uniform_params_from_range(0.0, 1.0 / 0.0, 8), DomainError);
}

TEST_CASE("degenerate range still round-trips the value") {
    const UniformParams p = uniform_params_from_range(5.0, 5.0, 8);
    const Tensor x({1}, {5.0f});
    const Tensor back = uniform_dequant(uniform_quant(x, p), p);
    CHECK(std::abs(back[0] - 5.0f) <= 1e-6f * 5.0f);

    const UniformParams z = uniform_params_from_range(0.0, 0.0, 8);
    CHECK(z.scale > 0.0f);
    const Tensor zx({1}, {0.0f});
    CHECK(uniform_dequant(uniform_quant(zx, z), z)[0] == doctest::Approx(0.0f).epsilon(1e-6));
}

TEST_CASE("uniform quant basics") {
    const UniformParams p{1.0f, 0, 2};
    CHECK(uniform_quant(Tensor({1}, {0.0f}), p)[0] == 0);
    CHECK(uniform_quant(Tensor({1}, {2.4f}), p)[0] == 2);
    CHECK(uniform_quant(Tensor({1}, {10.0f}), p)[0] == 3);  // saturates at 2^2-1
}

TEST_CASE("uniform dequant basics") {
    CHECK(uniform_dequant(IntTensor({1}, {7}, 8), UniformParams{0.5f, 7, 8})[0] == 0.0f);
    CHECK(uniform_dequant(IntTensor({1}, {0}, 8), UniformParams{1.0f, 2, 8})[0] == -2.0f);
}

TEST_CASE("uniform round-trip is exact on every grid point") {
    for (const int bits : {2, 4, 8}) {
        const UniformParams p = uniform_params_from_range(-2.0, 2.0, bits);
        const std::size_t codes = std::size_t{1} << bits;
        Tensor grid({codes});
        for (std::size_t n = 0; n < codes; ++n) {
            grid[n] = static_cast<float>(double(p.scale) * (double(n) - p.zero_point));
        }
        const IntTensor q = uniform_quant(grid, p);
        for (std::size_t n = 0; n < codes; ++n) CHECK(q[n] == n);
        const Tensor back = uniform_dequant(q, p);
        CHECK(bit_equal(back, grid));
    }
}

TEST_CASE("uniform round-trip contracts within half a step") {
    CounterRng rng(1001);
    for (int trial = 0; trial < 30; ++trial) {
        const double lo = -rng.next_unit() * 10.0;
        const double hi = rng.next_unit() * 10.0;
        const int bits = 2 + static_cast<int>(rng.next_u64() % 7);
        const UniformParams p = uniform_params_from_range(lo, hi, bits);
        const Tensor x = random_tensor(8, 8, 2000 + trial, lo, hi);
        const Tensor back = uniform_dequant(uniform_quant(x, p), p);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::abs(double(x[i]) - double(back[i])) <=
                  0.5 * double(p.scale) * (1.0 + 1e-6) + 1e-12);
        }
    }
}

TEST_CASE("quantization codes stay within the bit range") {
    const Tensor x = random_tensor(16, 16, 3001, -40.0, 40.0);
    for (const int bits : {2, 3, 5, 8}) {
        const std::uint32_t limit = (1u << bits) - 1u;
        const UniformParams up = uniform_params_from_range(-1.0, 1.0, bits);
        for (std::uint8_t c : uniform_quant(x, up).values()) CHECK(c <= limit);
        const Log2Params lp{1.0f, bits};
        for (std::uint8_t c : log2_quant(x, lp).values()) CHECK(c <= limit);
        const AgqParams ap{1.0f, bits, 4};
        for (std::uint8_t c : agq_quant(x, ap).values()) CHECK(c <= limit);
    }
}

TEST_CASE("log2 quantizer basics") {
    const Log2Params p{0.5f, 4};
    CHECK(log2_quant(Tensor({1}, {0.5f}), p)[0] == 0);
    CHECK(log2_dequant(IntTensor({1}, {0}, 4), p)[0] == 0.5f);

    CHECK(log2_quant(Tensor({1}, {0.125f}), p)[0] == 2);  // s/4
    CHECK(log2_dequant(IntTensor({1}, {2}, 4), p)[0] == 0.125f);

    // zero input lands on the smallest representable magnitude
    CHECK(log2_quant(Tensor({1}, {0.0f}), p)[0] == 15);
    CHECK(log2_dequant(IntTensor({1}, {15}, 4), p)[0] ==
          doctest::Approx(0.5 * std::exp2(-15.0)));
}

TEST_CASE("agq with tau=1 is bit-identical to log2") {
    const Tensor x = random_unit_tensor(64, 64, 4001);
    const Log2Params lp{1.0f, 4};
    const AgqParams ap{1.0f, 4, 1};
    const IntTensor ql = log2_quant(x, lp);
    const IntTensor qa = agq_quant(x, ap);
    CHECK(std::memcmp(ql.data(), qa.data(), ql.size()) == 0);
    CHECK(bit_equal(log2_dequant(ql, lp), agq_dequant(qa, ap)));
}

TEST_CASE("agq quant basics") {
    const AgqParams p2{1.0f, 4, 2};
    CHECK(agq_quant(Tensor({1}, {static_cast<float>(std::exp2(-1.5))}), p2)[0] == 3);
    for (const int tau : {1, 2, 4}) {
        const AgqParams p{1.0f, 4, tau};
        CHECK(agq_quant(Tensor({1}, {1.0f}), p)[0] == 0);  // a = s
    }
    CHECK(agq_dequant(IntTensor({1}, {0}, 4), p2)[0] == 1.0f);
    CHECK(agq_dequant(IntTensor({1}, {3}, 4), p2)[0] == doctest::Approx(std::exp2(-1.5)));
}

TEST_CASE("agq dequant decreases strictly with the code") {
    for (const int bits : {2, 4, 6, 8}) {
        for (const int tau : {1, 2, 4}) {
            const std::uint32_t codes = 1u << bits;
            for (std::uint32_t q = 1; q < codes; ++q) {
                CHECK(agq_dequant_value(q, 1.0, tau) < agq_dequant_value(q - 1, 1.0, tau));
            }
            // float storage is non-increasing (deep codes can underflow)
            const AgqParams p{1.0f, bits, tau};
            IntTensor all({codes}, bits);
            for (std::uint32_t q = 0; q < codes; ++q) all[q] = static_cast<std::uint8_t>(q);
            const Tensor d = agq_dequant(all, p);
            for (std::uint32_t q = 1; q < codes; ++q) CHECK(d[q] <= d[q - 1]);
        }
    }
}

TEST_CASE("decompose splits the exponent exactly") {
    for (const int tau : {1, 2, 4}) {
        CHECK(agq_decompose(0, tau) == std::pair<int, int>{0, 0});
    }
    CHECK(agq_decompose(3, 2) == std::pair<int, int>{2, 1});
    CHECK(agq_decompose(4, 2) == std::pair<int, int>{2, 0});

    // floor(-q/tau) == -ceil(q/tau), i.e. -q == -shift*tau + residue
    for (const int tau : {1, 2, 4}) {
        for (int q = 0; q < 256; ++q) {
            const auto [shift, residue] = agq_decompose(q, tau);
            CHECK(-q == -shift * tau + residue);
            CHECK(residue >= 0);
            CHECK(residue < tau);
            CHECK(static_cast<int>(std::floor(-double(q) / tau)) == -shift);
        }
    }
}

TEST_CASE("lut construction and embedding") {
    const AgqLut big = build_lut(4, 8);
    CHECK(big.size() == 1024);  // 4 KB at 4 bytes per entry
    for (std::uint32_t u = 0; u < 256; ++u) CHECK(big.at(0, u) == static_cast<float>(u));

    const AgqLut two = build_lut(2, 8);
    CHECK(two.at(1, 1) == doctest::Approx(std::sqrt(2.0)));

    // the tau' table embeds in the tau table at stride tau/tau'
    for (const int small_tau : {1, 2}) {
        const AgqLut small = build_lut(small_tau, 8);
        const int stride = 4 / small_tau;
        for (int r = 0; r < small_tau; ++r) {
            for (std::uint32_t u = 0; u < 256; ++u) {
                CHECK(big.at(r * stride, u) == small.at(r, u));
            }
        }
    }
}

TEST_CASE("lut matmul exact mode matches the float path") {
    // single element: a_q = 3, tau = 2, v-hat = 1
    const AgqLut lut2 = build_lut(2, 4);
    const IntTensor a({1, 1}, {3}, 4);
    const IntTensor v({1, 1}, {1}, 4);
    const Tensor one = agq_matmul_lut(a, v, lut2, 1.0f, 1.0f, 0, LutMode::exact);
    CHECK(one[0] == doctest::Approx(std::exp2(-1.5)));

    for (const int tau : {1, 2, 4}) {
        for (const int bits : {4, 6, 8}) {
            const AgqLut lut = build_lut(tau, bits);
            const Tensor attn = random_unit_tensor(8, 8, 6000 + tau * 10 + bits);
            const Tensor vals = random_tensor(8, 8, 7000 + tau * 10 + bits, -2.0, 2.0);

            const AgqParams ap{1.0f, bits, tau};
            const IntTensor aq = agq_quant(attn, ap);
            const auto [vlo, vhi] = minmax(vals);
            const UniformParams vp = uniform_params_from_range(vlo, vhi, bits);
            const IntTensor vq = uniform_quant(vals, vp);

            const Tensor got = agq_matmul_lut(aq, vq, lut, ap.scale, vp.scale, vp.zero_point,
                                              LutMode::exact);
            const Tensor want = matmul(agq_dequant(aq, ap), uniform_dequant(vq, vp));
            const double rel =
                std::sqrt(frobenius_sq(got, want)) / std::sqrt(frobenius_sq(want, Tensor(want.shape())));
            CHECK(rel <= 1e-5);
        }
    }
}

TEST_CASE("lut matmul with all-zero codes reduces to a constant attention map") {
    const int bits = 6;
    const AgqLut lut = build_lut(2, bits);
    const IntTensor aq({4, 4}, bits);  // all zeros: a-hat = s_a everywhere
    const Tensor vals = random_tensor(4, 3, 8001, -1.0, 1.0);
    const auto [vlo, vhi] = minmax(vals);
    const UniformParams vp = uniform_params_from_range(vlo, vhi, bits);
    const IntTensor vq = uniform_quant(vals, vp);

    const float s_a = 0.75f;
    const Tensor got = agq_matmul_lut(aq, vq, lut, s_a, vp.scale, vp.zero_point, LutMode::exact);

    Tensor ones({4, 4});
    for (std::size_t i = 0; i < ones.size(); ++i) ones[i] = s_a;
    const Tensor want = matmul(ones, uniform_dequant(vq, vp));
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
    }
}

TEST_CASE("lut matmul hardware mode stays close to exact mode") {
    const int bits = 8;
    const AgqLut lut = build_lut(4, bits);
    const Tensor attn = random_unit_tensor(8, 8, 9001);
    const Tensor vals = random_tensor(8, 8, 9002, -2.0, 2.0);
    const AgqParams ap{1.0f, bits, 4};
    const IntTensor aq = agq_quant(attn, ap);
    const auto [vlo, vhi] = minmax(vals);
    const UniformParams vp = uniform_params_from_range(vlo, vhi, bits);
    const IntTensor vq = uniform_quant(vals, vp);

    const Tensor exact = agq_matmul_lut(aq, vq, lut, 1.0f, vp.scale, vp.zero_point,
                                        LutMode::exact);
    const Tensor hw = agq_matmul_lut(aq, vq, lut, 1.0f, vp.scale, vp.zero_point,
                                     LutMode::hardware);
    // truncation error is reported, not asserted to vanish
    const double rel = std::sqrt(frobenius_sq(hw, exact)) /
                       std::sqrt(frobenius_sq(exact, Tensor(exact.shape())));
    CHECK(rel < 0.5);
}

TEST_CASE("lut matmul validates the table") {
    const AgqLut lut = build_lut(2, 4);
    const IntTensor aq({2, 2}, 4);
    const IntTensor vq({2, 2}, 6);
    CHECK_THROWS_AS(agq_matmul_lut(aq, vq, lut, 1.0f, 1.0f, 0, LutMode::exact), DomainError);
}

TEST_CASE("per-channel weight quantization") {
    const Tensor w = random_tensor(16, 4, 10001, -3.0, 3.0);
    const PerChannelUniformParams p = per_channel_params_from(w, 6);
    CHECK(p.channels.size() == 4);
    const Tensor back = per_channel_dequant(per_channel_quant(w, p), p);
    for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK(std::abs(w(i, j) - back(i, j)) <= 0.5f * p.channels[j].scale * 1.000001f);
        }
    }
    CHECK_THROWS_AS(per_channel_quant(random_tensor(16, 5, 1, -1, 1), p), ShapeError);
}

TEST_SUITE_END();
