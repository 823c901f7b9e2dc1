#pragma once

#include <cstddef>
#include <functional>

namespace diffeo {

/// Worker count: hardware concurrency capped by the DIFFEO_THREADS
/// environment variable (values < 1 mean single-threaded).
int worker_count();

/// Static block partition of [0, n) over the workers. Deterministic: chunk
/// boundaries depend only on n and the worker count, and each chunk runs
/// sequentially, so floating-point reductions done per chunk and combined in
/// chunk order are reproducible.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn);

}  // namespace diffeo
