#pragma once

#include <functional>

namespace slicetrack {

// Worker threads used by parallel loops; defaults to hardware concurrency.
int max_threads();
void set_max_threads(int n);

// Static contiguous partition of [0, n) over the worker threads. Chunks are
// index-addressed, so results must be written to per-index slots; outputs
// are then independent of the thread count.
void parallel_for(long n, const std::function<void(long begin, long end, int chunk)>& fn);

}  // namespace slicetrack
