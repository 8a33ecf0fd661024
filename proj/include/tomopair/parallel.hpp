#pragma once

#include <cstddef>
#include <functional>

namespace tomopair {

// Process-wide worker count used by parallel_for. Thread count never changes
// numerical results: every parallel loop writes disjoint output ranges and
// keeps per-range accumulation order fixed.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs fn(begin, end) over a partition of [0, n) into contiguous chunks.
// Falls back to a single inline call when n is small or one thread is set.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// Convenience wrapper: fn(i) per index.
void parallel_for_each(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace tomopair
