#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pasrec {

/// Splits [0, n) into `workers` contiguous chunks and runs
/// fn(begin, end, worker_id) on each. Exceptions are rethrown on the caller.
template <class Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::clamp<std::size_t>(workers < 1 ? 1 : static_cast<std::size_t>(workers), 1,
                                                std::max<std::size_t>(n, 1));
  if (w == 1) {
    fn(std::size_t{0}, n, 0);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> threads;
  threads.reserve(w);
  for (std::size_t id = 0; id < w; ++id) {
    const std::size_t begin = n * id / w;
    const std::size_t end = n * (id + 1) / w;
    threads.emplace_back([&, begin, end, id] {
      try {
        fn(begin, end, static_cast<int>(id));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  threads.clear();
  if (error) std::rethrow_exception(error);
}

inline int effective_workers(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace pasrec
