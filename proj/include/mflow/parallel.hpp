#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mflow {

inline void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Static-schedule loop over [0, n). Bodies must write only to index-owned slots.
/// If bodies throw, the exception from the lowest index is rethrown after the
/// loop, so the reported failure does not depend on the thread count.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    const auto count = static_cast<std::int64_t>(n);
    std::int64_t failed_at = std::numeric_limits<std::int64_t>::max();
    std::exception_ptr failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(mflow_parallel_for_failure)
#endif
            if (i < failed_at) {
                failed_at = i;
                failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace mflow
