#pragma once

#include <cstddef>
#include <functional>

namespace lensforge {

// Worker count used when a caller passes jobs = 0.
std::size_t default_jobs();

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Indices are handed
// out dynamically; callers write results to slot i only, so the outcome
// does not depend on the schedule. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace lensforge
