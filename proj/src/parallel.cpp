#include "darkflash/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace darkflash {

namespace {
std::atomic<int> g_threads{1};
}

int worker_threads() { return g_threads.load(); }

void set_worker_threads(int n) { g_threads.store(std::max(1, n)); }

void parallel_ranges(int count, const std::function<void(int, int)>& fn) {
  const int workers = std::min(worker_threads(), std::max(1, count));
  if (workers <= 1 || count <= 1) {
    fn(0, count);
    return;
  }
  // Fixed partition by worker index; ranges are a pure function of count and
  // the configured worker cap, so outputs never depend on scheduling.
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(fn, begin, end);
  }
  for (auto& t : pool) t.join();
}

}  // namespace darkflash
