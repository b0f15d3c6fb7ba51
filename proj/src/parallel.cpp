#include "slicetrack/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace slicetrack {

namespace {
std::atomic<int> g_threads{0};  // 0 = hardware default
}

int max_threads() {
  const int n = g_threads.load();
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void set_max_threads(int n) { g_threads.store(n); }

void parallel_for(long n, const std::function<void(long, long, int)>& fn) {
  if (n <= 0) return;
  const int workers = std::min<long>(max_threads(), n);
  if (workers <= 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  const long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long begin = w * chunk;
    const long end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, &errors, begin, end, w] {
      try {
        fn(begin, end, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace slicetrack
