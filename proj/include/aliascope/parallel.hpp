#pragma once

#include <cstddef>
#include <functional>

namespace aliascope {

/// Worker cap: ALIASCOPE_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(index, worker) for index in [0, n). Each index is visited exactly
/// once; results must be written to per-index slots to stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t index, std::size_t worker)>& body);

}  // namespace aliascope
