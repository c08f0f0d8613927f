#include "d2d/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef D2D_HAVE_OPENMP
#include <omp.h>
#endif

namespace d2d {

int worker_count() {
    int n = 1;
#ifdef D2D_HAVE_OPENMP
    n = omp_get_max_threads();
#endif
    if (const char* env = std::getenv("D2DCACHE_THREADS")) {
        try {
            int cap = std::stoi(env);
            if (cap >= 1 && cap < n) n = cap;
        } catch (...) {
            // unparsable cap: ignore and keep the OpenMP default
        }
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  ExecPolicy policy) {
#ifdef D2D_HAVE_OPENMP
    if (policy == ExecPolicy::parallel && worker_count() > 1) {
        const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
        for (long long i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)policy;
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace d2d
