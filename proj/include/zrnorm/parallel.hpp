#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace zrnorm {

/// Process-wide worker count used by every parallel stage. Results never depend on it:
/// work is split into index-addressed slots and reduced in index order.
inline std::size_t& worker_count_storage() {
    static std::size_t n = 1;
    return n;
}
inline std::size_t worker_count() { return worker_count_storage(); }
inline void set_worker_count(std::size_t n) { worker_count_storage() = std::max<std::size_t>(1, n); }

/// Calls fn(i) for every i in [0, n) using up to worker_count() threads.
/// fn must only write to state owned by index i. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    for (std::size_t t = 0; t + 1 < workers; ++t) threads.emplace_back(body);
    body();
    threads.clear();
    if (error) std::rethrow_exception(error);
}

} // namespace zrnorm
