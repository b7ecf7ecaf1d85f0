#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace marketrank {

// Worker cap for the per-cell loops.  Defaults to the hardware count
// (at most 8) and is capped by the MARKETRANK_THREADS environment
// variable.  Results never depend on the thread count: every task
// writes to its own preallocated slot.
inline int worker_count() {
  static const int cached = [] {
    unsigned hw = std::thread::hardware_concurrency();
    int n = static_cast<int>(hw == 0 ? 1 : (hw > 8 ? 8 : hw));
    if (const char* env = std::getenv("MARKETRANK_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && v >= 1) {
        if (v < n) n = static_cast<int>(v);
      }
    }
    return n < 1 ? 1 : n;
  }();
  return cached;
}

// Runs fn(i) for i in [0, count).  Splits into contiguous chunks when more
// than one worker is available and the range is large enough to matter.
template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
  const int workers = worker_count();
  if (workers <= 1 || count < 256) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::int64_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace marketrank
