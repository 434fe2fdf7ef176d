#ifndef CRDDME_PARALLEL_HPP
#define CRDDME_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace crddme {

/// Worker count: CRDDME_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
inline int worker_count() {
  if (const char *env = std::getenv("CRDDME_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0)
      return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n) on up to worker_count() threads, handing out
/// indices dynamically. The first exception thrown by any call is rethrown.
/// Callers write results into per-index slots so the outcome does not depend
/// on scheduling.
template <typename Fn> void parallel_for(std::size_t n, Fn &&fn) {
  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error)
          error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t)
    pool.emplace_back(body);
  body();
  for (auto &t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace crddme

#endif
