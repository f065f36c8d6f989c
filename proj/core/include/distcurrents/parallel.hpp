#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace distcurrents {

/// Maps the "0 means all cores" convention onto a concrete thread count.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(begin, end) over a contiguous partition of [0, n) on `threads`
/// workers. Every output must go to a slot owned by its index: the partition
/// boundaries move with the thread count, so any cross-block accumulation
/// would lose bit-reproducibility. Reductions happen afterwards, over
/// buffers, with pairwise_sum.
inline void parallel_for(long n, int threads, const std::function<void(long, long)>& fn) {
  threads = resolve_threads(threads);
  if (n <= 0) return;
  if (threads == 1 || n == 1) {
    fn(0, n);
    return;
  }
  if (threads > n) threads = static_cast<int>(n);
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  std::vector<std::exception_ptr> errors(threads);
  const long chunk = (n + threads - 1) / threads;
  for (int t = 1; t < threads; ++t) {
    const long b = t * chunk;
    const long e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, t, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  try {
    fn(0, std::min(n, chunk));
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace distcurrents
