#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bifamp {

inline int default_thread_count() {
  if (const char* env = std::getenv("BIFAMP_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Process-wide cap installed by the CLI / C API.
int thread_limit();
void set_thread_limit(int n);

// Run body(i) for i in [0, count) on up to `threads` workers. Tasks are
// claimed from a shared counter (work stealing by index); exceptions are
// captured and rethrown on the caller. Results must be written to
// preassigned slots so output assembly is deterministic.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         int threads = 0) {
  if (threads <= 0) threads = thread_limit();
  if (threads > static_cast<int>(count)) threads = static_cast<int>(count);
  if (count == 0) return;
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> workers;
  workers.reserve(threads - 1);
  for (int t = 1; t < threads; ++t) workers.emplace_back(worker);
  worker();
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bifamp
