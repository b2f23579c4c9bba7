#pragma once

#include <cstddef>
#include <functional>

namespace sprout {

/// Worker cap: SPROUT_THREADS if set, else hardware concurrency; at least 1.
std::size_t max_threads();

/// Overrides the worker cap for the process (0 restores the default).
void set_max_threads(std::size_t n);

/**
 * Runs body(begin, end) over a static partition of [0, n).
 *
 * Callers only use this where each index writes disjoint outputs, so results
 * are bitwise identical for any thread count.
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 1);

}  // namespace sprout
