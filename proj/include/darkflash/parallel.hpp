#pragma once

#include <functional>

namespace darkflash {

// Global worker-count cap (CLI --threads). Defaults to 1; parallel sections
// partition work into ranges that do not depend on the thread count, so
// results are bit-identical for any setting.
int worker_threads();
void set_worker_threads(int n);

// Runs fn(begin, end) over [0, count) split into contiguous ranges. fn must
// only write to locations owned by its range.
void parallel_ranges(int count, const std::function<void(int, int)>& fn);

}  // namespace darkflash
