#include "cipred/core/threading.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace cipred {

namespace {
std::atomic<int> g_max_threads{0};  // 0 = not set, use hardware
}

void set_max_threads(int n) { g_max_threads.store(n > 0 ? n : 0); }

int max_threads() {
    const int n = g_max_threads.load();
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const int workers =
        std::max(1, static_cast<int>(std::min<std::int64_t>(threads, n)));
    if (workers == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    auto run = [&](int w) {
        const std::int64_t lo = n * w / workers;
        const std::int64_t hi = n * (w + 1) / workers;
        try {
            if (lo < hi) fn(lo, hi);
        } catch (...) {
            if (!failed.exchange(true)) err = std::current_exception();
        }
    };
    for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& t : pool) t.join();
    if (failed.load()) std::rethrow_exception(err);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    parallel_for(n, max_threads(), fn);
}

}  // namespace cipred
