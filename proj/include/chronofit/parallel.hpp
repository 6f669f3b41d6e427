#ifndef CHRONOFIT_PARALLEL_HPP_
#define CHRONOFIT_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace chronofit {

// Resolve a requested thread count: n > 0 is taken as-is, n == 0 means the
// CHRONOFIT_THREADS environment variable if set, otherwise all hardware
// threads.
int resolve_threads(int requested);

// Run fn(i) for i in [0, count) on up to `threads` worker threads using a
// static block partition. Each index must write only to its own output slot,
// which keeps results identical for any thread count. Exceptions thrown by
// fn are captured and rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  int threads);

}  // namespace chronofit

#endif  // CHRONOFIT_PARALLEL_HPP_
