#ifndef PANELITE_PARALLEL_HPP
#define PANELITE_PARALLEL_HPP

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace panelite {

// Runs fn(i) for i in [0, total) on up to `threads` workers with static
// chunking. Callers write results into preallocated per-index slots, so the
// outcome is identical for any worker count. The first exception thrown by a
// worker is rethrown on the calling thread.
inline void parallel_for(int total, int threads,
                         const std::function<void(int)>& fn) {
  if (total <= 0) return;
  if (threads < 1) threads = 1;
  threads = std::min(threads, total);
  if (threads == 1) {
    for (int i = 0; i < total; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < threads; ++w) {
    workers.emplace_back([&, w]() {
      try {
        for (int i = w; i < total; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace panelite

#endif  // PANELITE_PARALLEL_HPP
