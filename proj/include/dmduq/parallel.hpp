#pragma once

#include <cstddef>
#include <functional>

namespace dmduq {

// Thread count from DMDUQ_THREADS, falling back to hardware concurrency.
int default_thread_count();

// Calls body(i) for every i in [0, count). Work items are independent and
// write to pre-assigned slots, so results never depend on `threads`. The
// first exception thrown by any item is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace dmduq
