#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ausc/kernels.hpp"

using namespace ausc::kernels;

namespace {

template <typename T>
std::vector<T> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<T> v(n);
    for (auto& x : v) x = T(u(rng));
    return v;
}

}  // namespace

TEST_CASE("same padding splits the odd cell after") {
    CHECK(same_padding(300, 20, 5).before == 7);
    CHECK(same_padding(300, 20, 5).after == 8);
    CHECK(same_padding(6, 2, 1).before == 0);
    CHECK(same_padding(6, 2, 1).after == 1);
    CHECK(same_padding(60, 4, 2).before == 1);
    CHECK(same_padding(60, 4, 2).after == 1);
}

TEST_CASE_TEMPLATE("blocked gemm agrees with the triple loop", T, float, double) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> dim(1, 97);
    const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-12;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t M = dim(rng), N = dim(rng), K = dim(rng);
        const Trans ta = trial % 2 ? Trans::Yes : Trans::No, tb = trial % 4 >= 2 ? Trans::Yes : Trans::No;
        const auto A = random_vector<T>(M * K, rng), B = random_vector<T>(K * N, rng);
        auto C1 = random_vector<T>(M * N, rng);
        auto C2 = C1;
        const T alpha = T(0.7), beta = trial % 3 ? T(0.3) : T(0);
        const std::size_t lda = ta == Trans::No ? K : M, ldb = tb == Trans::No ? N : K;
        serial::gemm(ta, tb, M, N, K, alpha, A.data(), lda, B.data(), ldb, beta, C1.data(), N);
        omp::gemm(ta, tb, M, N, K, alpha, A.data(), lda, B.data(), ldb, beta, C2.data(), N);
        for (std::size_t i = 0; i < C1.size(); ++i) CHECK(std::abs(C1[i] - C2[i]) <= tol * (1 + std::abs(C1[i])));
    }
}

TEST_CASE("im2col convolution agrees with the direct loop") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> small(1, 5), len(3, 40);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t cin = small(rng), cout = small(rng), h = small(rng) + 1, w = len(rng);
        const std::size_t kh = std::min(small(rng), h), kw = std::min<std::size_t>(small(rng) * 3, w);
        const auto in = random_vector<double>(cin * h * w, rng);
        const auto k = random_vector<double>(cout * cin * kh * kw, rng);
        const auto b = random_vector<double>(cout, rng);
        std::vector<double> direct(cout * h * w), col(cin * kh * kw * h * w), fast(cout * h * w);
        serial::conv2d_direct(in.data(), cin, h, w, k.data(), b.data(), cout, kh, kw, direct.data());
        omp::im2col(in.data(), cin, h, w, kh, kw, col.data());
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < h * w; ++i) fast[co * h * w + i] = b[co];
        omp::gemm(Trans::No, Trans::No, cout, h * w, cin * kh * kw, 1.0, k.data(), cin * kh * kw, col.data(), h * w,
                  1.0, fast.data(), h * w);
        for (std::size_t i = 0; i < fast.size(); ++i) CHECK(std::abs(fast[i] - direct[i]) < 1e-12);
    }
}

TEST_CASE("col2im is the adjoint of im2col") {
    std::mt19937_64 rng(3);
    const std::size_t cin = 3, h = 4, w = 9, kh = 2, kw = 4;
    const auto x = random_vector<double>(cin * h * w, rng);
    const auto y = random_vector<double>(cin * kh * kw * h * w, rng);
    std::vector<double> col(y.size()), back(x.size());
    omp::im2col(x.data(), cin, h, w, kh, kw, col.data());
    omp::col2im(y.data(), cin, h, w, kh, kw, back.data());
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += col[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("parallel max pooling is identical to the serial loop") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> small(1, 6), len(5, 80);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t c = small(rng), h = small(rng), w = len(rng);
        const std::size_t ph = small(rng), pw = small(rng) * 2, sh = small(rng), sw = small(rng);
        auto in = random_vector<float>(c * h * w, rng);
        if (trial % 5 == 0) std::fill(in.begin(), in.end(), 0.25f);  // ties
        const std::size_t n = c * ((h + sh - 1) / sh) * ((w + sw - 1) / sw);
        std::vector<float> o1(n), o2(n);
        std::vector<std::size_t> a1(n), a2(n);
        serial::maxpool(in.data(), c, h, w, ph, pw, sh, sw, o1.data(), a1.data());
        omp::maxpool(in.data(), c, h, w, ph, pw, sh, sw, o2.data(), a2.data());
        CHECK(o1 == o2);
        CHECK(a1 == a2);
    }
}
