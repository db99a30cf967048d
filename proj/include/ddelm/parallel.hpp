#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace ddelm {

/// Runs fn(0..n-1) on up to `workers` threads. Callers write only to
/// per-index slots; reductions happen after the join, in index order.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int nt = std::min(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(nt);
  for (int t = 0; t < nt; ++t)
    threads.emplace_back([&, t] {
      for (int i = t; i < n; i += nt) fn(i);
    });
  for (auto& th : threads) th.join();
}

}  // namespace ddelm
