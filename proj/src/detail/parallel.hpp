#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "condkl/grid.hpp"

namespace condkl::detail {

/// Runs body(i, worker) for i in [begin, end) on `threads` workers with a
/// static interleaved schedule. Each index is processed exactly once and
/// results must be written to index-keyed slots, so the outcome does not
/// depend on the worker count. The exception from the lowest failing index
/// is rethrown.
template <class Body>
void parallel_for(Index begin, Index end, int threads, Body&& body) {
  const Index count = end - begin;
  if (count <= 0) return;
  const int workers = static_cast<int>(std::clamp<Index>(threads, 1, count));
  if (workers == 1) {
    for (Index i = begin; i < end; ++i) body(i, 0);
    return;
  }
  std::mutex mu;
  Index failed_at = end;
  std::exception_ptr failure;
  auto run = [&](int w) {
    for (Index i = begin + w; i < end; i += workers) {
      try {
        body(i, w);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace condkl::detail
