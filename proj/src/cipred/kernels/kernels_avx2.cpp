// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be reached after the runtime CPU check in the dispatcher.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "cipred/kernels/kernels.hpp"

namespace cipred::kernels::detail {

namespace {

inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

inline double hsum256d(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

float sdot_avx2(std::size_t n, const float* x, const float* y) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8)
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    float s = hsum256(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sdot_acc_avx2(std::size_t n, const float* x, const float* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        const __m256 yv = _mm256_loadu_ps(y + i);
        const __m256d xl = _mm256_cvtps_pd(_mm256_castps256_ps128(xv));
        const __m256d yl = _mm256_cvtps_pd(_mm256_castps256_ps128(yv));
        const __m256d xh = _mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1));
        const __m256d yh = _mm256_cvtps_pd(_mm256_extractf128_ps(yv, 1));
        acc0 = _mm256_fmadd_pd(xl, yl, acc0);
        acc1 = _mm256_fmadd_pd(xh, yh, acc1);
    }
    double s = hsum256d(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += static_cast<double>(x[i]) * y[i];
    return s;
}

void saxpy_avx2(std::size_t n, float a, const float* x, float* y) {
    const __m256 av = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 yv = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void sscale_avx2(std::size_t n, float a, float* x) {
    const __m256 av = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

double ssum_avx2(std::size_t n, const float* x) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(xv)));
        acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)));
    }
    double s = hsum256d(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i];
    return s;
}

void relu_fwd_avx2(std::size_t n, const float* x, float* y) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_avx2(std::size_t n, const float* x, const float* dy, float* dx) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(dy + i)));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

// Mul/add kept unfused so the update is bit-identical to the scalar path.
void adam_update_avx2(std::size_t n, float* p, const float* g, float* m, float* v,
                      float b1, float b2, float c1, float c2, float lr, float eps,
                      float wd) {
    const __m256 b1v = _mm256_set1_ps(b1), b2v = _mm256_set1_ps(b2);
    const __m256 ob1 = _mm256_set1_ps(1.0f - b1), ob2 = _mm256_set1_ps(1.0f - b2);
    const __m256 c1v = _mm256_set1_ps(c1), c2v = _mm256_set1_ps(c2);
    const __m256 lrv = _mm256_set1_ps(lr), epsv = _mm256_set1_ps(eps);
    const __m256 lrwd = _mm256_set1_ps(lr * wd);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gv = _mm256_loadu_ps(g + i);
        __m256 mv = _mm256_add_ps(_mm256_mul_ps(b1v, _mm256_loadu_ps(m + i)),
                                  _mm256_mul_ps(ob1, gv));
        __m256 vv = _mm256_add_ps(_mm256_mul_ps(b2v, _mm256_loadu_ps(v + i)),
                                  _mm256_mul_ps(_mm256_mul_ps(ob2, gv), gv));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        const __m256 mhat = _mm256_div_ps(mv, c1v);
        const __m256 vhat = _mm256_div_ps(vv, c2v);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv);
        __m256 pv = _mm256_loadu_ps(p + i);
        const __m256 step = _mm256_add_ps(_mm256_mul_ps(lrv, _mm256_div_ps(mhat, denom)),
                                          _mm256_mul_ps(lrwd, pv));
        _mm256_storeu_ps(p + i, _mm256_sub_ps(pv, step));
    }
    for (; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
        const float mhat = m[i] / c1;
        const float vhat = v[i] / c2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps)) + lr * wd * p[i];
    }
}

// Row panels of 4 with two 8-lane accumulators per row; k is the innermost
// serial loop so per-element accumulation order matches the scalar kernel
// up to FMA contraction.
void sgemm_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                const float* b, float* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
    constexpr std::size_t JB = 16;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const float* a0 = a + (i + 0) * k;
        const float* a1 = a + (i + 1) * k;
        const float* a2 = a + (i + 2) * k;
        const float* a3 = a + (i + 3) * k;
        float* c0 = c + (i + 0) * n;
        float* c1 = c + (i + 1) * n;
        float* c2 = c + (i + 2) * n;
        float* c3 = c + (i + 3) * n;
        std::size_t j = 0;
        for (; j + JB <= n; j += JB) {
            __m256 acc00 = _mm256_loadu_ps(c0 + j), acc01 = _mm256_loadu_ps(c0 + j + 8);
            __m256 acc10 = _mm256_loadu_ps(c1 + j), acc11 = _mm256_loadu_ps(c1 + j + 8);
            __m256 acc20 = _mm256_loadu_ps(c2 + j), acc21 = _mm256_loadu_ps(c2 + j + 8);
            __m256 acc30 = _mm256_loadu_ps(c3 + j), acc31 = _mm256_loadu_ps(c3 + j + 8);
            for (std::size_t kk = 0; kk < k; ++kk) {
                const __m256 b0 = _mm256_loadu_ps(b + kk * n + j);
                const __m256 b1 = _mm256_loadu_ps(b + kk * n + j + 8);
                const __m256 av0 = _mm256_set1_ps(a0[kk]);
                const __m256 av1 = _mm256_set1_ps(a1[kk]);
                const __m256 av2 = _mm256_set1_ps(a2[kk]);
                const __m256 av3 = _mm256_set1_ps(a3[kk]);
                acc00 = _mm256_fmadd_ps(av0, b0, acc00);
                acc01 = _mm256_fmadd_ps(av0, b1, acc01);
                acc10 = _mm256_fmadd_ps(av1, b0, acc10);
                acc11 = _mm256_fmadd_ps(av1, b1, acc11);
                acc20 = _mm256_fmadd_ps(av2, b0, acc20);
                acc21 = _mm256_fmadd_ps(av2, b1, acc21);
                acc30 = _mm256_fmadd_ps(av3, b0, acc30);
                acc31 = _mm256_fmadd_ps(av3, b1, acc31);
            }
            _mm256_storeu_ps(c0 + j, acc00); _mm256_storeu_ps(c0 + j + 8, acc01);
            _mm256_storeu_ps(c1 + j, acc10); _mm256_storeu_ps(c1 + j + 8, acc11);
            _mm256_storeu_ps(c2 + j, acc20); _mm256_storeu_ps(c2 + j + 8, acc21);
            _mm256_storeu_ps(c3 + j, acc30); _mm256_storeu_ps(c3 + j + 8, acc31);
        }
        for (; j < n; ++j) {
            float s0 = c0[j], s1 = c1[j], s2 = c2[j], s3 = c3[j];
            for (std::size_t kk = 0; kk < k; ++kk) {
                const float bv = b[kk * n + j];
                s0 += a0[kk] * bv;
                s1 += a1[kk] * bv;
                s2 += a2[kk] * bv;
                s3 += a3[kk] * bv;
            }
            c0[j] = s0; c1[j] = s1; c2[j] = s2; c3[j] = s3;
        }
    }
    for (; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256 acc = _mm256_loadu_ps(ci + j);
            for (std::size_t kk = 0; kk < k; ++kk)
                acc = _mm256_fmadd_ps(_mm256_set1_ps(ai[kk]),
                                      _mm256_loadu_ps(b + kk * n + j), acc);
            _mm256_storeu_ps(ci + j, acc);
        }
        for (; j < n; ++j) {
            float s = ci[j];
            for (std::size_t kk = 0; kk < k; ++kk) s += ai[kk] * b[kk * n + j];
            ci[j] = s;
        }
    }
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops table = {
        sdot_avx2,   sdot_acc_avx2, saxpy_avx2,       sscale_avx2, ssum_avx2,
        relu_fwd_avx2, relu_bwd_avx2, adam_update_avx2, sgemm_avx2,
    };
    return table;
}

}  // namespace cipred::kernels::detail

#endif  // x86-64
