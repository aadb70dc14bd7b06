#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace drlfm {

// Runs fn(k) for k in [0, n_tasks) on up to n_threads workers. Tasks must
// write only to their own slots; the first exception wins and is rethrown
// after all workers join.
inline void parallel_for(std::size_t n_tasks, int n_threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n_threads < 1) n_threads = 1;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(n_threads), n_tasks);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n_tasks; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= n_tasks || failed.load()) break;
        try {
          fn(k);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace drlfm
