#pragma once

#include <cstddef>
#include <functional>

namespace d2d {

// Every parallel entry point also runs in a plain serial loop; the serial
// path is the reference the parallel one is tested against.
enum class ExecPolicy { serial, parallel };

// OpenMP thread budget, capped by the D2DCACHE_THREADS environment variable.
int worker_count();

// Runs fn(i) for i in [0, n). With ExecPolicy::parallel the iterations are
// distributed over worker_count() threads; fn must only write to per-index
// state so results never depend on the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  ExecPolicy policy = ExecPolicy::parallel);

}  // namespace d2d
