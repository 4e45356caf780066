#pragma once

#include <cstddef>
#include <functional>

namespace brickscan {

/// Worker count: explicit override if set, else BRICKSCAN_THREADS (0 = auto),
/// else hardware concurrency.
int thread_count();
void set_thread_count(int n);  // 0 restores the environment/auto behaviour

/// Runs body(i) for i in [0, n) over contiguous static chunks. Callers write
/// into per-index slots, so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace brickscan
