#ifndef ESSM_PARALLEL_HPP
#define ESSM_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace essm {

/// Runs body(i) for i in [0, n) on up to hardware_concurrency threads. Each
/// index is processed exactly once; the first exception is rethrown after
/// all workers finish. Results must be written to per-index slots.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t max_workers = 0) {
  if (n == 0) {
    return;
  }
  std::size_t workers = max_workers ? max_workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(work);
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace essm

#endif  // ESSM_PARALLEL_HPP
