#include <cmath>
#include <cstring>

#include "cipred/kernels/kernels.hpp"

namespace cipred::kernels::detail {

namespace {

float sdot_scalar(std::size_t n, const float* x, const float* y) {
    float s = 0.0f;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sdot_acc_scalar(std::size_t n, const float* x, const float* y) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * y[i];
    return s;
}

void saxpy_scalar(std::size_t n, float a, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void sscale_scalar(std::size_t n, float a, float* x) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double ssum_scalar(std::size_t n, const float* x) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

void relu_fwd_scalar(std::size_t n, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_scalar(std::size_t n, const float* x, const float* dy, float* dx) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void adam_update_scalar(std::size_t n, float* p, const float* g, float* m, float* v,
                        float b1, float b2, float c1, float c2, float lr, float eps,
                        float wd) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
        const float mhat = m[i] / c1;
        const float vhat = v[i] / c2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps)) + lr * wd * p[i];
    }
}

void sgemm_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
    for (std::size_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const float av = ai[kk];
            if (av == 0.0f) continue;
            const float* bk = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        sdot_scalar,   sdot_acc_scalar, saxpy_scalar,       sscale_scalar, ssum_scalar,
        relu_fwd_scalar, relu_bwd_scalar, adam_update_scalar, sgemm_scalar,
    };
    return table;
}

}  // namespace cipred::kernels::detail
