#pragma once

#include <cstddef>
#include <functional>

namespace torifano {

/// Worker count: TORIFANO_THREADS if set (>= 1), else hardware concurrency.
unsigned worker_count();

/// Calls fn(i) for i in [0, n) on up to worker_count() threads, in
/// contiguous chunks. fn must only write to slots owned by i, so results do
/// not depend on the thread count. The first exception thrown (lowest chunk)
/// is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace torifano
