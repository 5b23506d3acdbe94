#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace fsmdp {

struct Exec {
  int workers = 1;
};

// Static block partition; every index is written by exactly one worker, so
// results are identical for any worker count.
template <class F>
void parallel_for(std::size_t begin, std::size_t end, int workers, F&& fn) {
  const std::size_t n = end > begin ? end - begin : 0;
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  pool.reserve(w);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t lo = begin + t * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace fsmdp
