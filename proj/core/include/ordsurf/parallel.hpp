#pragma once

#include <cstdint>
#include <functional>

namespace ordsurf {

// Worker count used by parallel_for. Defaults to the hardware concurrency,
// capped by the ORDSURF_THREADS environment variable (minimum 1).
int worker_threads();

// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each, using
// the shared worker pool. fn must only write state addressed by its own index
// range; under that contract results are identical for any thread count.
// Nested calls run inline on the calling thread.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace ordsurf
