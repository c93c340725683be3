#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qprobe {

namespace detail {
inline thread_local bool in_parallel_region = false;
}

/// Runs body(i) for i in [0, n) on a small pool of threads. Each index is
/// handled exactly once; callers write results into slot i so the outcome does
/// not depend on scheduling. The first exception thrown is rethrown. Nested
/// calls run sequentially on the calling worker.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers =
        std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1 || detail::in_parallel_region) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        const bool outer = detail::in_parallel_region;
        detail::in_parallel_region = true;
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
        detail::in_parallel_region = outer;
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(run);
    run();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace qprobe
