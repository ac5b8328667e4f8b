#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rotordyn/errors.hpp"

namespace rotordyn {

/// Worker count: ROTORDYN_THREADS if set, else the hardware concurrency.
inline int thread_count()
{
    if (const char* env = std::getenv("ROTORDYN_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
        warn(std::string("ignoring invalid ROTORDYN_THREADS=") + env);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs task(i) for i in [0, n) on up to `threads` workers. Tasks must write
/// only to their own outputs; the first exception is rethrown.
template <class Task>
void parallel_for(std::size_t n, Task&& task, int threads = thread_count())
{
    const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(n))));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Sums items[lo, hi) by recursive halving. The order of additions depends
/// only on the count, never on scheduling.
template <class T, class Add>
T pairwise_reduce(const std::vector<T>& items, std::size_t lo, std::size_t hi, Add&& add)
{
    if (hi - lo == 1) return items[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    return add(pairwise_reduce(items, lo, mid, add), pairwise_reduce(items, mid, hi, add));
}

} // namespace rotordyn
