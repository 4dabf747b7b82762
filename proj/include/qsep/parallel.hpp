#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qsep {

/// Worker count from an explicit request, else QSEP_THREADS, else hardware.
unsigned resolve_threads(unsigned requested = 0);

/// Runs fn(task) for task in [0, n_tasks) on up to `threads` workers.
/// Tasks are claimed dynamically; callers that need deterministic results
/// must write per-task outputs and reduce them in task order afterwards.
template <class Fn>
void parallel_for(std::size_t n_tasks, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n_tasks, 1))));
    if (threads == 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < n_tasks;) {
            try {
                fn(t);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads - 1);
        for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
        worker();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace qsep
