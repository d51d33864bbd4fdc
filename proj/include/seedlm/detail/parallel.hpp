// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace seedlm::detail {

// Runs fn(begin, end) over a static partition of [0, n). Each index lands in
// exactly one chunk, so results indexed by position are identical for every
// thread count. The first exception thrown by any chunk is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  std::size_t want = threads > 0 ? static_cast<std::size_t>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  want = std::min(want, n);
  if (want <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(want);
  pool.reserve(want);
  for (std::size_t t = 0; t < want; ++t) {
    const std::size_t begin = n * t / want;
    const std::size_t end = n * (t + 1) / want;
    pool.emplace_back([&fn, &errors, t, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace seedlm::detail
