// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "attnquant/rng.hpp"
#include "attnquant/tensor.hpp"

using namespace attnquant;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
    CounterRng rng(seed);
    Tensor t({r, c});
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(lo + (hi - lo) * rng.next_unit());
    }
    return t;
}

Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0f;
    return t;
}

// independent product: long-double accumulators, k-outer loop order
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
    std::vector<long double> acc(a.rows() * b.cols(), 0.0L);
    for (std::size_t t = 0; t < a.cols(); ++t) {
        for (std::size_t i = 0; i < a.rows(); ++i) {
            for (std::size_t j = 0; j < b.cols(); ++j) {
                acc[i * b.cols() + j] +=
                    static_cast<long double>(a(i, t)) * static_cast<long double>(b(t, j));
            }
        }
    }
    Tensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(acc[i]);
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("construction validates shape volume") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0f, 2.0f}), ShapeError);
    CHECK(Tensor({2, 3}).size() == 6);
    CHECK(Tensor::scalar(4.0f).rank() == 0);
    CHECK(Tensor::scalar(4.0f).size() == 1);
}

TEST_CASE("int tensor enforces bit range") {
    CHECK_THROWS_AS(IntTensor({2}, {3, 200}, 4), DomainError);
    CHECK_THROWS_AS(IntTensor({1}, {0}, 9), DomainError);
    CHECK(IntTensor({2}, {3, 15}, 4).bits() == 4);
}

TEST_CASE("matmul identity and scalar cases") {
    const Tensor m = random_tensor(3, 3, 11);
    const Tensor im = matmul(identity(3), m);
    CHECK(std::memcmp(im.data(), m.data(), m.size() * sizeof(float)) == 0);

    const Tensor a({1, 1}, {2.0f}), b({1, 1}, {3.0f});
    CHECK(matmul(a, b)[0] == doctest::Approx(6.0f));
}

TEST_CASE("matmul matches triple-loop reference") {
    const Tensor a = random_tensor(4, 5, 21);
    const Tensor b = random_tensor(5, 3, 22);
    const Tensor got = matmul(a, b);
    const Tensor want = matmul_oracle(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));
    }
}

TEST_CASE("matmul rejects dimension mismatch") {
    CHECK_THROWS_AS(matmul(random_tensor(2, 3, 1), random_tensor(4, 2, 2)), ShapeError);
}

TEST_CASE("matmul is bilinear in the left factor") {
    CounterRng rng(300);
    for (int trial = 0; trial < 20; ++trial) {
        const float alpha = static_cast<float>(rng.next_unit() * 4.0 - 2.0);
        const Tensor a = random_tensor(5, 4, 400 + trial);
        const Tensor b = random_tensor(4, 6, 500 + trial);
        const Tensor lhs = matmul(scale(a, alpha), b);
        const Tensor rhs = scale(matmul(a, b), alpha);
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("channel_mean basics") {
    const Tensor m({2, 2}, {1.0f, -2.0f, 3.0f, -4.0f});
    const Tensor mean = channel_mean(m);
    CHECK(mean[0] == doctest::Approx(2.0f));
    CHECK(mean[1] == doctest::Approx(-3.0f));

    Tensor c({4, 3});
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 7.5f;
    const Tensor cm = channel_mean(c);
    for (std::size_t j = 0; j < 3; ++j) CHECK(cm[j] == doctest::Approx(7.5f));

    CHECK_THROWS_AS(channel_mean(Tensor({0, 3})), DomainError);
}

TEST_CASE("channel_mean matches compensated-sum reference") {
    const Tensor m = random_tensor(100, 8, 31, -10.0, 10.0);
    const Tensor got = channel_mean(m);
    for (std::size_t j = 0; j < 8; ++j) {
        // Kahan summation as the independent oracle
        double sum = 0.0, comp = 0.0;
        for (std::size_t i = 0; i < 100; ++i) {
            const double y = static_cast<double>(m(i, j)) - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        CHECK(got[j] == doctest::Approx(sum / 100.0).epsilon(1e-6));
    }
}

TEST_CASE("frobenius_sq basics and oracle") {
    const Tensor a = random_tensor(6, 7, 41);
    CHECK(frobenius_sq(a, a) == 0.0);

    const Tensor u({2}, {1.0f, 2.0f}), z({2}, {0.0f, 0.0f});
    CHECK(frobenius_sq(u, z) == doctest::Approx(5.0));

    const Tensor b = random_tensor(6, 7, 42);
    double want = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        want += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
    }
    CHECK(frobenius_sq(a, b) == doctest::Approx(want).epsilon(1e-6));
    CHECK_THROWS_AS(frobenius_sq(a, random_tensor(7, 6, 43)), ShapeError);
}

TEST_CASE("minmax basics and sort oracle") {
    const Tensor t({3}, {-1.0f, 0.0f, 2.0f});
    CHECK(minmax(t) == std::pair<float, float>{-1.0f, 2.0f});

    Tensor c({5});
    for (std::size_t i = 0; i < 5; ++i) c[i] = 3.25f;
    CHECK(minmax(c) == std::pair<float, float>{3.25f, 3.25f});

    const Tensor r = random_tensor(16, 16, 51, -5.0, 5.0);
    std::vector<float> sorted(r.data(), r.data() + r.size());
    std::sort(sorted.begin(), sorted.end());
    CHECK(minmax(r) == std::pair<float, float>{sorted.front(), sorted.back()});

    CHECK_THROWS_AS(minmax(Tensor({0})), DomainError);
}

TEST_CASE("col_scale basics") {
    const Tensor m = random_tensor(4, 3, 61);
    Tensor ones({3});
    for (std::size_t j = 0; j < 3; ++j) ones[j] = 1.0f;
    const Tensor same = col_scale(m, ones);
    CHECK(std::memcmp(same.data(), m.data(), m.size() * sizeof(float)) == 0);

    const Tensor col({2, 1}, {1.0f, 2.0f});
    const Tensor neg = col_scale(col, Tensor({1}, {-1.0f}));
    CHECK(neg(0, 0) == -1.0f);
    CHECK(neg(1, 0) == -2.0f);

    CHECK_THROWS_AS(col_scale(m, Tensor({2})), ShapeError);
}

TEST_CASE("col_scale with a sign vector is an involution") {
    const Tensor m = random_tensor(8, 6, 71);
    CounterRng rng(72);
    Tensor signs({6});
    for (std::size_t j = 0; j < 6; ++j) signs[j] = rng.next_unit() < 0.5 ? -1.0f : 1.0f;
    const Tensor twice = col_scale(col_scale(m, signs), signs);
    CHECK(std::memcmp(twice.data(), m.data(), m.size() * sizeof(float)) == 0);
}

TEST_CASE("softmax_rows basics") {
    const Tensor flat = softmax_rows(Tensor({1, 2}, {0.0f, 0.0f}));
    CHECK(flat(0, 0) == doctest::Approx(0.5f));
    CHECK(flat(0, 1) == doctest::Approx(0.5f));

    const Tensor hot = softmax_rows(Tensor({1, 2}, {1000.0f, 0.0f}));
    CHECK(hot(0, 0) == doctest::Approx(1.0f));
    CHECK(hot(0, 1) >= 0.0f);
    CHECK(hot(0, 1) <= 1e-30f);
    CHECK(std::isfinite(hot(0, 0)));
}

TEST_CASE("softmax_rows matches extended-precision reference") {
    const Tensor m = random_tensor(8, 12, 81, -4.0, 4.0);
    const Tensor got = softmax_rows(m);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        long double hi = m(i, 0);
        for (std::size_t j = 1; j < m.cols(); ++j) hi = std::max(hi, (long double)m(i, j));
        long double sum = 0.0L;
        std::vector<long double> e(m.cols());
        for (std::size_t j = 0; j < m.cols(); ++j) {
            e[j] = std::exp((long double)m(i, j) - hi);
            sum += e[j];
        }
        for (std::size_t j = 0; j < m.cols(); ++j) {
            CHECK(got(i, j) == doctest::Approx((double)(e[j] / sum)).epsilon(1e-6));
        }
    }
}

TEST_CASE("softmax_rows rows sum to one and stay positive") {
    const Tensor m = random_tensor(20, 33, 91, -6.0, 6.0);
    const Tensor s = softmax_rows(m);
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < s.cols(); ++j) {
            CHECK(s(i, j) > 0.0f);
            CHECK(s(i, j) <= 1.0f);
            sum += s(i, j);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_SUITE_END();
