#pragma once

#include <cstddef>
#include <functional>

namespace ewlab {

// Worker count: hardware concurrency, capped by EWLAB_THREADS when set.
int thread_count();

// Runs f(i) for i in [0, n) on up to thread_count() threads, in contiguous
// chunks. Results must not depend on scheduling (each i writes its own slot).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace ewlab
