#pragma once

#include <cstddef>
#include <string>

namespace cipred::kernels {

// Data-parallel inner loops behind the tensor math: one scalar reference
// implementation plus SIMD variants (AVX2 on x86-64, NEON on aarch64)
// selected at runtime. The scalar path is the semantic reference; SIMD
// variants are equivalence-tested against it. Reductions may reassociate,
// so dot/sum results can differ from scalar by normal rounding slack.
//
// All kernels are single-threaded; callers parallelize across independent
// work items.

struct Ops {
    // dst = a * b, both length n: out = sum(x[i] * y[i]) in float.
    float (*sdot)(std::size_t n, const float* x, const float* y);
    // Double-precision accumulation over float inputs (Gram matrices).
    double (*sdot_acc)(std::size_t n, const float* x, const float* y);
    // y[i] += a * x[i].
    void (*saxpy)(std::size_t n, float a, const float* x, float* y);
    // x[i] *= a.
    void (*sscale)(std::size_t n, float a, float* x);
    // Sum with double accumulation.
    double (*ssum)(std::size_t n, const float* x);
    // y[i] = max(x[i], 0).
    void (*relu_fwd)(std::size_t n, const float* x, float* y);
    // dx[i] = x[i] > 0 ? dy[i] : 0.
    void (*relu_bwd)(std::size_t n, const float* x, const float* dy, float* dx);
    // Adam with decoupled weight decay, bias corrections precomputed:
    //   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g
    //   p -= lr * (m/c1) / (sqrt(v/c2) + eps) + lr * wd * p
    void (*adam_update)(std::size_t n, float* p, const float* g, float* m, float* v,
                        float b1, float b2, float c1, float c2, float lr, float eps,
                        float wd);
    // C (MxN) = A (MxK) * B (KxN), row major, optional accumulate into C.
    void (*sgemm)(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate);
};

enum class Backend { scalar, avx2, neon };

// Active operation table (dispatch resolved on first use).
const Ops& ops();

Backend active_backend();
std::string backend_name(Backend b);
bool backend_available(Backend b);
// Forces a backend (tests, benchmarking). Throws ValidationError when the
// backend is unavailable on this machine.
void set_backend(Backend b);
// Back to automatic selection (best available).
void reset_backend();

// Row-parallel GEMM helper on top of ops().sgemm. Each output row is
// produced by exactly one worker with a fixed accumulation order, so the
// result is identical for any thread count.
void sgemm_parallel(std::size_t m, std::size_t n, std::size_t k, const float* a,
                    const float* b, float* c, bool accumulate);

namespace detail {
const Ops& scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
const Ops& neon_ops();
#endif
}  // namespace detail

}  // namespace cipred::kernels
