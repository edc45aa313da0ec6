#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace kinemo {

/// Worker count: KINEMO_THREADS env var if set (min 1), else hardware cores.
inline int thread_count() {
  if (const char* env = std::getenv("KINEMO_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Static block partition of [0, n) across workers. Deterministic: worker w
/// always gets the same index range, and results must go to per-index slots.
template <typename F>
void parallel_for(int n, F&& body) {
  const int workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace kinemo
