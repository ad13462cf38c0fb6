#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mpsim {

/// Runs fn(0..n-1) across at most num_threads workers. Each index is
/// processed exactly once; callers get deterministic results by writing to
/// index-owned output slots. num_threads <= 1 runs inline. The first
/// exception thrown by any worker is rethrown on the calling thread.
inline void parallel_for(int n, int num_threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (num_threads <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min(num_threads, n);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mpsim
