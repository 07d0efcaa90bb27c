#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace dip {

/// Fixed-width worker pool for embarrassingly parallel index loops. Tasks
/// write into caller-owned slots keyed by index, so results do not depend
/// on scheduling order.
class ThreadPool {
public:
    explicit ThreadPool(int threads) : threads_(threads < 1 ? 1 : threads) {}

    int threads() const { return threads_; }

    /// Runs f(0) ... f(count - 1), distributing indices across the pool.
    /// The first exception thrown by any task is rethrown on the caller.
    template <typename F>
    void parallel_index(long count, F&& f) const {
        if (count <= 0) return;
        const int workers = static_cast<int>(std::min<long>(threads_, count));
        if (workers == 1) {
            for (long i = 0; i < count; ++i) f(i);
            return;
        }
        std::atomic<long> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&]() {
            for (;;) {
                const long i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= count) return;
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> team;
        team.reserve(workers);
        for (int w = 0; w < workers; ++w) team.emplace_back(worker);
        for (auto& t : team) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    /// Pool width from the DIP_THREADS environment variable, falling back
    /// to hardware concurrency.
    static int default_threads() {
        if (const char* env = std::getenv("DIP_THREADS")) {
            const int n = std::atoi(env);
            if (n >= 1) return n;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }

private:
    int threads_;
};

}  // namespace dip
