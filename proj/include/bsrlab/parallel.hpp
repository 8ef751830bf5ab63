#pragma once

#include <cstddef>
#include <functional>

namespace bsrlab {

/// Pool size: BSRLAB_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, count) on worker_count() threads. Results must be
/// written to per-index slots; the first exception thrown is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace bsrlab
