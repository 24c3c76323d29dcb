#include "fieldreg/parallel.hpp"

#include <thread>
#include <vector>

namespace fieldreg {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::uint64_t n, int threads,
                  const std::function<void(std::uint64_t, std::uint64_t)>& chunk) {
  const int workers = resolve_threads(threads);
  if (n == 0) return;
  if (workers <= 1 || n < 1024) {
    chunk(0, n);
    return;
  }
  const std::uint64_t w = static_cast<std::uint64_t>(workers);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::uint64_t t = 0; t < w; ++t) {
    const std::uint64_t begin = n * t / w;
    const std::uint64_t end = n * (t + 1) / w;
    if (begin == end) continue;
    pool.emplace_back([&chunk, begin, end] { chunk(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace fieldreg
