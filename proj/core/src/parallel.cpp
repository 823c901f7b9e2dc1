#include "diffeo/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace diffeo {

int worker_count() {
  static const int cached = [] {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("DIFFEO_THREADS")) {
      const int cap = std::atoi(env);
      if (cap >= 1) n = std::min(n, cap);
    }
    return n;
  }();
  return cached;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn) {
  const int workers = worker_count();
  if (n == 0) return;
  if (workers == 1 || n < 256) {
    chunk_fn(0, n);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(workers, n);
  const std::size_t step = (n + chunks - 1) / chunks;
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t lo = c * step;
    const std::size_t hi = std::min(n, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] { chunk_fn(lo, hi); });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace diffeo
