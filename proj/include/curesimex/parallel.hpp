#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace curesimex {

// number of worker threads to use when the caller passes 0 (= "all cores")
inline int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// runs body(i) for i in [0, count) on `jobs` threads; work is claimed through
// a shared counter, so results must not depend on which thread ran which
// index (callers write into preallocated per-index slots).  The first
// exception thrown by any body is rethrown after all threads join.
template <typename Body>
void parallel_for(int count, int jobs, Body&& body) {
    jobs = resolve_jobs(jobs);
    if (count <= 0) return;
    if (jobs == 1 || count == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    int n_threads = std::min(jobs, count);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace curesimex
