#pragma once

#include <cstddef>
#include <functional>

namespace cgff {

/// Resolves a requested worker count: 0 means the hardware concurrency.
int resolve_threads(int requested) noexcept;

/// Calls body(i) for every i in [0, n) on up to `threads` workers, using a
/// fixed contiguous partition. Callers write per-index results and reduce
/// them afterwards in index order, so outputs do not depend on `threads`.
/// If bodies throw, the exception of the smallest failing index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace cgff
