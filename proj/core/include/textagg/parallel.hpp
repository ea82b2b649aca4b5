#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace textagg {

// Worker count: explicit request, else $AGG_THREADS, else hardware
// concurrency. Always at least 1.
unsigned resolve_threads(std::optional<unsigned> requested = std::nullopt);

// Runs fn(task) for task in [0, task_count) on up to `threads` workers.
// Callers write into per-task slots and reduce in task order, so results do
// not depend on the worker count. The first exception thrown by any task is
// rethrown after all workers join.
void parallel_for(std::size_t task_count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace textagg
