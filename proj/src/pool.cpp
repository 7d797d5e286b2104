#include "pool.hpp"

namespace bifamp {

namespace {
std::atomic<int> g_thread_limit{0};
}

int thread_limit() {
  int n = g_thread_limit.load();
  return n > 0 ? n : default_thread_count();
}

void set_thread_limit(int n) { g_thread_limit.store(n > 0 ? n : 0); }

}  // namespace bifamp
