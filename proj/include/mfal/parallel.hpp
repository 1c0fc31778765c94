#ifndef MFAL_PARALLEL_HPP
#define MFAL_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mfal {

/// Worker cap: MFAL_THREADS if set to a positive integer, else the number of
/// logical cores.
inline unsigned worker_count() {
  if (const char *env = std::getenv("MFAL_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0)
        return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n). Iterations must write disjoint outputs; the
/// first exception thrown by any iteration is rethrown on the caller.
template <typename Fn> void parallel_for(std::size_t n, Fn &&fn) {
  const std::size_t workers =
      std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first)
            first = std::current_exception();
          return;
        }
      }
    });
  }
  pool.clear();
  if (first)
    std::rethrow_exception(first);
}

} // namespace mfal

#endif
