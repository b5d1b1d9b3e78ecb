#pragma once

#include <cstddef>
#include <functional>

namespace shiftscope {

// Worker cap for intra-stage parallelism. Work is split into a fixed chunk
// grid that does not depend on the thread count, and reductions happen in
// chunk order, so results are bit-identical for any --threads value.

int max_threads();
void set_max_threads(int n);

// Calls fn(i) for every i in [0, n). fn must only write to slots owned by i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Chunked variant for reductions: fn(chunk_id, begin, end). chunk_count(n)
// gives the fixed grid size so callers can pre-allocate per-chunk partials.
std::size_t chunk_count(std::size_t n);
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace shiftscope
