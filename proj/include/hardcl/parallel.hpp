#ifndef HARDCL_PARALLEL_HPP
#define HARDCL_PARALLEL_HPP

#include <cstddef>
#include <thread>
#include <vector>

namespace hardcl {

// Runs fn(i) for i in [0, n) across up to n_threads workers on contiguous
// chunks. Each index is visited exactly once; callers write results into
// index-addressed buffers and reduce sequentially afterwards, so results
// do not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int n_threads, Fn&& fn) {
    if (n == 0) return;
    std::size_t workers = n_threads < 1 ? 1 : static_cast<std::size_t>(n_threads);
    if (workers > n) workers = n;
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk;
        std::size_t hi = lo + chunk < n ? lo + chunk : n;
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace hardcl

#endif
