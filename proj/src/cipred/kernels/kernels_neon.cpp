// NEON variants for aarch64. Mirrors the AVX2 kernels at 4-lane width.

#if defined(__aarch64__) || defined(__ARM_NEON)

#include <arm_neon.h>

#include <cmath>
#include <cstring>

#include "cipred/kernels/kernels.hpp"

namespace cipred::kernels::detail {

namespace {

float sdot_neon(std::size_t n, const float* x, const float* y) {
    float32x4_t acc0 = vdupq_n_f32(0.0f);
    float32x4_t acc1 = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = vfmaq_f32(acc0, vld1q_f32(x + i), vld1q_f32(y + i));
        acc1 = vfmaq_f32(acc1, vld1q_f32(x + i + 4), vld1q_f32(y + i + 4));
    }
    for (; i + 4 <= n; i += 4)
        acc0 = vfmaq_f32(acc0, vld1q_f32(x + i), vld1q_f32(y + i));
    float s = vaddvq_f32(vaddq_f32(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sdot_acc_neon(std::size_t n, const float* x, const float* y) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t xv = vld1q_f32(x + i);
        const float32x4_t yv = vld1q_f32(y + i);
        const float64x2_t xl = vcvt_f64_f32(vget_low_f32(xv));
        const float64x2_t yl = vcvt_f64_f32(vget_low_f32(yv));
        const float64x2_t xh = vcvt_high_f64_f32(xv);
        const float64x2_t yh = vcvt_high_f64_f32(yv);
        acc0 = vfmaq_f64(acc0, xl, yl);
        acc1 = vfmaq_f64(acc1, xh, yh);
    }
    double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) s += static_cast<double>(x[i]) * y[i];
    return s;
}

void saxpy_neon(std::size_t n, float a, const float* x, float* y) {
    const float32x4_t av = vdupq_n_f32(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), av, vld1q_f32(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void sscale_neon(std::size_t n, float a, float* x) {
    const float32x4_t av = vdupq_n_f32(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vmulq_f32(av, vld1q_f32(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

double ssum_neon(std::size_t n, const float* x) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t xv = vld1q_f32(x + i);
        acc0 = vaddq_f64(acc0, vcvt_f64_f32(vget_low_f32(xv)));
        acc1 = vaddq_f64(acc1, vcvt_high_f64_f32(xv));
    }
    double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) s += x[i];
    return s;
}

void relu_fwd_neon(std::size_t n, const float* x, float* y) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmaxq_f32(vld1q_f32(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_neon(std::size_t n, const float* x, const float* dy, float* dx) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const uint32x4_t mask = vcgtq_f32(vld1q_f32(x + i), zero);
        const float32x4_t dyv = vld1q_f32(dy + i);
        vst1q_f32(dx + i, vreinterpretq_f32_u32(
                              vandq_u32(mask, vreinterpretq_u32_f32(dyv))));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void adam_update_neon(std::size_t n, float* p, const float* g, float* m, float* v,
                      float b1, float b2, float c1, float c2, float lr, float eps,
                      float wd) {
    // Scalar body; the op is memory bound and must stay bit-identical to the
    // reference update.
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
        const float mhat = m[i] / c1;
        const float vhat = v[i] / c2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps)) + lr * wd * p[i];
    }
}

void sgemm_neon(std::size_t m, std::size_t n, std::size_t k, const float* a,
                const float* b, float* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
    std::size_t i = 0;
    for (; i + 2 <= m; i += 2) {
        const float* a0 = a + (i + 0) * k;
        const float* a1 = a + (i + 1) * k;
        float* c0 = c + (i + 0) * n;
        float* c1 = c + (i + 1) * n;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            float32x4_t acc00 = vld1q_f32(c0 + j), acc01 = vld1q_f32(c0 + j + 4);
            float32x4_t acc10 = vld1q_f32(c1 + j), acc11 = vld1q_f32(c1 + j + 4);
            for (std::size_t kk = 0; kk < k; ++kk) {
                const float32x4_t b0 = vld1q_f32(b + kk * n + j);
                const float32x4_t b1 = vld1q_f32(b + kk * n + j + 4);
                acc00 = vfmaq_n_f32(acc00, b0, a0[kk]);
                acc01 = vfmaq_n_f32(acc01, b1, a0[kk]);
                acc10 = vfmaq_n_f32(acc10, b0, a1[kk]);
                acc11 = vfmaq_n_f32(acc11, b1, a1[kk]);
            }
            vst1q_f32(c0 + j, acc00); vst1q_f32(c0 + j + 4, acc01);
            vst1q_f32(c1 + j, acc10); vst1q_f32(c1 + j + 4, acc11);
        }
        for (; j < n; ++j) {
            float s0 = c0[j], s1 = c1[j];
            for (std::size_t kk = 0; kk < k; ++kk) {
                const float bv = b[kk * n + j];
                s0 += a0[kk] * bv;
                s1 += a1[kk] * bv;
            }
            c0[j] = s0; c1[j] = s1;
        }
    }
    for (; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            float32x4_t acc = vld1q_f32(ci + j);
            for (std::size_t kk = 0; kk < k; ++kk)
                acc = vfmaq_n_f32(acc, vld1q_f32(b + kk * n + j), ai[kk]);
            vst1q_f32(ci + j, acc);
        }
        for (; j < n; ++j) {
            float s = ci[j];
            for (std::size_t kk = 0; kk < k; ++kk) s += ai[kk] * b[kk * n + j];
            ci[j] = s;
        }
    }
}

}  // namespace

const Ops& neon_ops() {
    static const Ops table = {
        sdot_neon,   sdot_acc_neon, saxpy_neon,       sscale_neon, ssum_neon,
        relu_fwd_neon, relu_bwd_neon, adam_update_neon, sgemm_neon,
    };
    return table;
}

}  // namespace cipred::kernels::detail

#endif  // aarch64 / NEON
