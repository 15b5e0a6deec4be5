#pragma once

#include <cstdint>
#include <functional>

namespace cipred {

// Global worker cap, set once by the CLI --threads flag. Work partitioning is
// static and index-ordered, so results do not depend on scheduling; they may
// depend on the thread count where floating-point reductions are split, which
// is why the cap is part of a run's configuration.
void set_max_threads(int n);
int max_threads();

// Runs fn(begin, end) over a static partition of [0, n) on up to max_threads()
// workers (including the calling thread). Blocks until done. Exceptions from
// workers are rethrown on the caller.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

// Same, but with an explicit worker cap for this call.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace cipred
