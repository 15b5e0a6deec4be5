#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <tuple>
#include <vector>

#include "cipred/core/errors.hpp"
#include "cipred/core/rng.hpp"
#include "cipred/core/threading.hpp"
#include "cipred/kernels/kernels.hpp"

using namespace cipred;
using kernels::Backend;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(scale * rng.normal());
    return v;
}

struct BackendGuard {
    ~BackendGuard() { kernels::reset_backend(); }
};

bool simd_available() {
    return kernels::backend_available(Backend::avx2) ||
           kernels::backend_available(Backend::neon);
}

Backend simd_backend() {
    return kernels::backend_available(Backend::avx2) ? Backend::avx2 : Backend::neon;
}

}  // namespace

TEST_CASE("scalar backend is always available") {
    CHECK(kernels::backend_available(Backend::scalar));
    CHECK_NOTHROW(kernels::ops());
}

TEST_CASE("forcing an unavailable backend throws") {
    BackendGuard guard;
    if (!kernels::backend_available(Backend::neon))
        CHECK_THROWS_AS(kernels::set_backend(Backend::neon), ValidationError);
    if (!kernels::backend_available(Backend::avx2))
        CHECK_THROWS_AS(kernels::set_backend(Backend::avx2), ValidationError);
}

TEST_CASE("simd dot/sum agree with scalar within rounding slack") {
    if (!simd_available()) return;
    BackendGuard guard;
    for (std::size_t n : {std::size_t(1), std::size_t(7), std::size_t(8),
                          std::size_t(63), std::size_t(256), std::size_t(10001)}) {
        const auto x = random_vec(n, 11 + n);
        const auto y = random_vec(n, 23 + n);
        kernels::set_backend(Backend::scalar);
        const double dot_s = kernels::ops().sdot(n, x.data(), y.data());
        const double dacc_s = kernels::ops().sdot_acc(n, x.data(), y.data());
        const double sum_s = kernels::ops().ssum(n, x.data());
        kernels::set_backend(simd_backend());
        const double dot_v = kernels::ops().sdot(n, x.data(), y.data());
        const double dacc_v = kernels::ops().sdot_acc(n, x.data(), y.data());
        const double sum_v = kernels::ops().ssum(n, x.data());
        const double scale = std::max(1.0, std::sqrt(static_cast<double>(n)));
        CHECK(std::fabs(dot_s - dot_v) <= 1e-4 * scale);
        CHECK(std::fabs(dacc_s - dacc_v) <= 1e-7 * scale);
        CHECK(std::fabs(sum_s - sum_v) <= 1e-7 * scale);
    }
}

TEST_CASE("simd elementwise kernels match scalar bit for bit") {
    if (!simd_available()) return;
    BackendGuard guard;
    const std::size_t n = 1031;
    const auto x = random_vec(n, 5);
    const auto dy = random_vec(n, 6);

    kernels::set_backend(Backend::scalar);
    std::vector<float> relu_s(n), bwd_s(n), scale_s = x;
    kernels::ops().relu_fwd(n, x.data(), relu_s.data());
    kernels::ops().relu_bwd(n, x.data(), dy.data(), bwd_s.data());
    kernels::ops().sscale(n, 1.7f, scale_s.data());

    kernels::set_backend(simd_backend());
    std::vector<float> relu_v(n), bwd_v(n), scale_v = x;
    kernels::ops().relu_fwd(n, x.data(), relu_v.data());
    kernels::ops().relu_bwd(n, x.data(), dy.data(), bwd_v.data());
    kernels::ops().sscale(n, 1.7f, scale_v.data());

    CHECK(relu_s == relu_v);
    CHECK(bwd_s == bwd_v);
    CHECK(scale_s == scale_v);
}

TEST_CASE("adam update is bit-identical across backends") {
    if (!simd_available()) return;
    BackendGuard guard;
    const std::size_t n = 517;
    const auto g = random_vec(n, 7);
    auto run = [&](Backend b) {
        kernels::set_backend(b);
        std::vector<float> p = random_vec(n, 8);
        std::vector<float> m = random_vec(n, 9, 0.1);
        std::vector<float> v = random_vec(n, 10, 0.01);
        for (auto& x : v) x = std::fabs(x);
        kernels::ops().adam_update(n, p.data(), g.data(), m.data(), v.data(), 0.9f,
                                   0.999f, 0.1f, 0.001f, 1e-4f, 1e-8f, 1e-5f);
        return std::make_tuple(p, m, v);
    };
    CHECK(run(Backend::scalar) == run(simd_backend()));
}

TEST_CASE("adam first step with constant gradient moves by about -lr") {
    const std::size_t n = 16;
    std::vector<float> p(n, 0.5f), g(n, 0.25f), m(n, 0.0f), v(n, 0.0f);
    // After one bias-corrected step, mhat = g and vhat = g^2, so the update
    // is lr * g / (|g| + eps), i.e. lr up to eps.
    kernels::ops().adam_update(n, p.data(), g.data(), m.data(), v.data(), 0.9f, 0.999f,
                               0.1f, 0.001f, 1e-4f, 1e-8f, 0.0f);
    for (float x : p) CHECK(x == doctest::Approx(0.5f - 1e-4f).epsilon(1e-4));
}

TEST_CASE("zero gradient with zero weight decay leaves parameters unchanged") {
    const std::size_t n = 32;
    std::vector<float> p = random_vec(n, 3), g(n, 0.0f), m(n, 0.0f), v(n, 0.0f);
    const std::vector<float> before = p;
    kernels::ops().adam_update(n, p.data(), g.data(), m.data(), v.data(), 0.9f, 0.999f,
                               0.1f, 0.001f, 1e-3f, 1e-8f, 0.0f);
    CHECK(p == before);
}

TEST_CASE("saxpy matches the reference within rounding") {
    if (!simd_available()) return;
    BackendGuard guard;
    const std::size_t n = 777;
    const auto x = random_vec(n, 31);
    kernels::set_backend(Backend::scalar);
    std::vector<float> ys = random_vec(n, 32);
    kernels::ops().saxpy(n, 0.37f, x.data(), ys.data());
    kernels::set_backend(simd_backend());
    std::vector<float> yv = random_vec(n, 32);
    kernels::ops().saxpy(n, 0.37f, x.data(), yv.data());
    for (std::size_t i = 0; i < n; ++i)
        CHECK(ys[i] == doctest::Approx(yv[i]).epsilon(1e-5));
}

TEST_CASE("gemm matches a naive double-precision triple loop") {
    BackendGuard guard;
    for (const auto& [m, n, k] :
         {std::tuple<int, int, int>{1, 1, 1}, {3, 5, 7}, {4, 16, 27}, {16, 33, 9},
          {8, 40, 144}, {5, 8, 3}}) {
        const auto a = random_vec(static_cast<std::size_t>(m) * k, 41 + m);
        const auto b = random_vec(static_cast<std::size_t>(k) * n, 42 + n);
        std::vector<double> ref(static_cast<std::size_t>(m) * n, 0.0);
        for (int i = 0; i < m; ++i)
            for (int kk = 0; kk < k; ++kk)
                for (int j = 0; j < n; ++j)
                    ref[static_cast<std::size_t>(i) * n + j] +=
                        static_cast<double>(a[static_cast<std::size_t>(i) * k + kk]) *
                        b[static_cast<std::size_t>(kk) * n + j];

        std::vector<float> c(static_cast<std::size_t>(m) * n, 7.0f);
        kernels::ops().sgemm(m, n, k, a.data(), b.data(), c.data(), false);
        for (std::size_t i = 0; i < c.size(); ++i)
            CHECK(c[i] == doctest::Approx(ref[i]).epsilon(2e-4));

        std::vector<float> c2(static_cast<std::size_t>(m) * n, 1.0f);
        kernels::ops().sgemm(m, n, k, a.data(), b.data(), c2.data(), true);
        for (std::size_t i = 0; i < c2.size(); ++i)
            CHECK(c2[i] == doctest::Approx(1.0 + ref[i]).epsilon(2e-4));
    }
}

TEST_CASE("simd gemm agrees with scalar gemm") {
    if (!simd_available()) return;
    BackendGuard guard;
    const int m = 19, n = 67, k = 91;
    const auto a = random_vec(static_cast<std::size_t>(m) * k, 61);
    const auto b = random_vec(static_cast<std::size_t>(k) * n, 62);
    kernels::set_backend(Backend::scalar);
    std::vector<float> cs(static_cast<std::size_t>(m) * n);
    kernels::ops().sgemm(m, n, k, a.data(), b.data(), cs.data(), false);
    kernels::set_backend(simd_backend());
    std::vector<float> cv(static_cast<std::size_t>(m) * n);
    kernels::ops().sgemm(m, n, k, a.data(), b.data(), cv.data(), false);
    for (std::size_t i = 0; i < cs.size(); ++i)
        CHECK(cs[i] == doctest::Approx(cv[i]).epsilon(1e-4));
}

TEST_CASE("row-parallel gemm is identical for any worker count") {
    const int m = 37, n = 129, k = 65;
    const auto a = random_vec(static_cast<std::size_t>(m) * k, 51);
    const auto b = random_vec(static_cast<std::size_t>(k) * n, 52);
    std::vector<float> c1(static_cast<std::size_t>(m) * n), c2 = c1;
    set_max_threads(1);
    kernels::sgemm_parallel(m, n, k, a.data(), b.data(), c1.data(), false);
    set_max_threads(4);
    kernels::sgemm_parallel(m, n, k, a.data(), b.data(), c2.data(), false);
    set_max_threads(0);
    CHECK(c1 == c2);
}
