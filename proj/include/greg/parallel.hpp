#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace greg {

/// Worker count for data-parallel loops: GREG_THREADS if set, else the
/// hardware concurrency.
inline int thread_count()
{
    static const int n = [] {
        if (const char *env = std::getenv("GREG_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0) return v;
        }
        return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    }();
    return n;
}

/// Runs fn(begin, end) over disjoint chunks of [0, n). Chunks write disjoint
/// outputs only, so results do not depend on the thread count.
template <class Fn>
void parallel_for(int n, Fn &&fn, int min_chunk = 16)
{
    const int workers = std::min(thread_count(), std::max(1, n / std::max(1, min_chunk)));
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int b = w * chunk;
        const int e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto &t : pool) t.join();
}

} // namespace greg
