#pragma once

#include <cstddef>
#include <functional>

namespace volfilter {

// Worker count from VOLFILTER_THREADS, else hardware concurrency. Never
// influences numerical results: work items write to their own slots.
std::size_t worker_count();

// Runs body(begin, end) over contiguous chunks of [0, n) on up to `workers`
// threads (0 = worker_count()). Exceptions from workers are rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t workers = 0);

}  // namespace volfilter
