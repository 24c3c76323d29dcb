#pragma once

#include <cstdint>
#include <functional>

namespace fieldreg {

/// Number of workers actually used for a requested count (0 = all hardware threads).
int resolve_threads(int requested);

/// Static chunking of [0,n) over workers. Chunks must write disjoint state;
/// results are then independent of the worker count.
void parallel_for(std::uint64_t n, int threads,
                  const std::function<void(std::uint64_t, std::uint64_t)>& chunk);

}  // namespace fieldreg
