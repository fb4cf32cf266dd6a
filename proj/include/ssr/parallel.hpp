#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace ssr {

// Runs fn(i, worker) for i in [0, n) over at most `workers` threads; worker k
// takes i with i % workers == k, so each worker's internal order is fixed and
// per-worker results can be reduced deterministically afterwards.
inline void parallel_indexed(int n, int workers, const std::function<void(int, int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += workers) fn(i, w);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace ssr
