#pragma once

#include <cstddef>
#include <functional>

namespace capcm {

/// Worker count for per-node loops: hardware concurrency capped by CAPCM_THREADS.
unsigned thread_count();

/// Runs body(p) for p in [0, count).  Iterations must be independent; results are identical
/// for every thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace capcm
