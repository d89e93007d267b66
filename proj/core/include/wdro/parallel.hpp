#pragma once

#include "wdro/core.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace wdro {

/// Runs fn(i) for i in [0, count) on up to `threads` workers in contiguous
/// chunks. fn must only write to slot i of its outputs.
template <class Fn>
void parallel_for(Index count, Index threads, Fn&& fn) {
  if (threads <= 1 || count < 2 * threads) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  const Index workers = std::min(threads, count);
  const Index chunk = (count + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          const Index end = std::min(count, (w + 1) * chunk);
          for (Index i = w * chunk; i < end; ++i) fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace wdro
