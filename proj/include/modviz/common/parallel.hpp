#pragma once

#include <cstddef>
#include <functional>

namespace modviz {

/// Worker count: MODVIZ_THREADS (if set) capped by hardware concurrency;
/// always 1 while strict-deterministic mode is on.
std::size_t worker_count();

void set_strict_deterministic(bool on);
bool strict_deterministic();

/// Runs fn(i) for i in [0, n). Work items must not share mutable state; the
/// result is independent of how items are distributed over workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace modviz
