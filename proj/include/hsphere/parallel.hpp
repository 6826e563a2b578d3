#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hsphere {

// Process-wide cap on worker threads for replicate-level parallelism.
// Results never depend on this value: each work item derives its own RNG
// stream and writes to its own slot; cross-item aggregation is integral.
int max_threads();
void set_max_threads(int n);

// Runs fn(i) for i in [0, n) on up to max_threads() workers with a blocked
// index split. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hsphere
