#pragma once

#include <cstddef>
#include <functional>

namespace aind {

inline constexpr const char* kThreadsEnv = "AIND_NUM_THREADS";

// Worker count from AIND_NUM_THREADS (default 1). Anything other than a
// positive integer is a ConfigError.
int thread_count();

// Calls fn(i) for i in [0, n) on up to thread_count() threads. Callers write
// results by index, so output does not depend on scheduling. The first
// exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace aind
