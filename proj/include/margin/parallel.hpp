#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace margin {

/// Worker threads for parallel loops. Honors MARGIN_ENGINE_THREADS (0 or unset = all cores).
int worker_count();

/// Runs body(i) for i in [0, count) on worker_count() threads. The first exception
/// thrown by any iteration is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto n = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
    for (long i = 0; i < n; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace margin
