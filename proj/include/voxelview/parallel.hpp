#pragma once

#include <cstddef>
#include <functional>

namespace voxelview {

// Worker cap from VOXELVIEW_THREADS (0 or unset = hardware concurrency).
int worker_count();

// Runs fn(0..n-1) over a static chunk partition. Callers keep outputs
// deterministic by writing into per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace voxelview
