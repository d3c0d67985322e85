#pragma once

#include <cstddef>
#include <functional>

namespace calfmon {

/// Worker count for data-parallel loops: CALFMON_THREADS if set, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls `fn(i)` for every i in [0, n), split into contiguous chunks over
/// worker threads. Iterations must be independent; the first exception thrown
/// by any iteration is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace calfmon
