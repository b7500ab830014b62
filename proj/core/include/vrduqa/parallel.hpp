#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace vrduqa {

/// Runs fn(0..n-1) on up to `workers` threads. Indices are claimed in
/// increasing order. The first exception thrown stops further claims and is
/// rethrown once all threads have joined.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first;
  std::mutex mu;
  auto body = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::jthread> threads;
  for (std::size_t t = 0; t < std::min(workers, n); ++t) threads.emplace_back(body);
  threads.clear();
  if (first) std::rethrow_exception(first);
}

}  // namespace vrduqa
