#include "cipred/kernels/kernels.hpp"

#include <atomic>

#include "cipred/core/errors.hpp"
#include "cipred/core/threading.hpp"

namespace cipred::kernels {

namespace {

Backend detect_best() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return Backend::avx2;
    return Backend::scalar;
#elif defined(__aarch64__)
    return Backend::neon;
#else
    return Backend::scalar;
#endif
}

std::atomic<int> g_forced{-1};  // -1 = auto

Backend resolve() {
    const int forced = g_forced.load(std::memory_order_relaxed);
    if (forced >= 0) return static_cast<Backend>(forced);
    static const Backend best = detect_best();
    return best;
}

}  // namespace

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::neon:
#if defined(__aarch64__) || defined(__ARM_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const Ops& ops() {
    switch (resolve()) {
#if defined(__x86_64__) || defined(_M_X64)
        case Backend::avx2:
            return detail::avx2_ops();
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
        case Backend::neon:
            return detail::neon_ops();
#endif
        default:
            return detail::scalar_ops();
    }
}

Backend active_backend() { return resolve(); }

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

void set_backend(Backend b) {
    if (!backend_available(b))
        throw ValidationError("kernel backend not available on this machine: " +
                              backend_name(b));
    g_forced.store(static_cast<int>(b), std::memory_order_relaxed);
}

void reset_backend() { g_forced.store(-1, std::memory_order_relaxed); }

void sgemm_parallel(std::size_t m, std::size_t n, std::size_t k, const float* a,
                    const float* b, float* c, bool accumulate) {
    const Ops& k_ops = ops();
    const std::size_t flops = 2 * m * n * k;
    if (flops < (std::size_t(1) << 22) || max_threads() == 1) {
        k_ops.sgemm(m, n, k, a, b, c, accumulate);
        return;
    }
    parallel_for(static_cast<std::int64_t>(m), [&](std::int64_t lo, std::int64_t hi) {
        k_ops.sgemm(static_cast<std::size_t>(hi - lo), n, k, a + lo * k, b, c + lo * n,
                    accumulate);
    });
}

}  // namespace cipred::kernels
