#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace srblab {

// Process-wide worker count; 0 means hardware concurrency.
void set_threads(int n);
int threads();

// Runs body(i) for i in [0, n) on statically partitioned contiguous chunks.
// Each index is visited exactly once; callers write results into
// preallocated slots, so the outcome does not depend on the worker count.
// An exception from the lowest-numbered failing chunk is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(threads()), n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errs(w);
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        std::size_t lo = n * t / w, hi = n * (t + 1) / w;
        pool.emplace_back([&, t, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace srblab
