#ifndef MFGSBS_PARALLEL_HPP
#define MFGSBS_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "mfgsbs/error.hpp"

namespace mfgsbs {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into slot i so the outcome
/// does not depend on scheduling. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Worker count plus an optional wall-clock deadline checked cooperatively.
struct RunControl {
  unsigned threads = 1;
  std::optional<std::chrono::steady_clock::time_point> deadline;

  void check() const {
    if (deadline && std::chrono::steady_clock::now() > *deadline) {
      throw TimeoutError("run exceeded its time limit");
    }
  }

  static RunControl with_timeout(unsigned threads, std::chrono::duration<double> limit) {
    RunControl rc;
    rc.threads = threads;
    rc.deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(limit);
    return rc;
  }
};

/// Calls fn(subset) for each size-`k` subset of `items` in lexicographic
/// order of positions; stops early when fn returns true. Returns whether it
/// stopped early.
template <typename Fn>
bool for_each_combination(const std::vector<int>& items, std::size_t k, Fn&& fn) {
  if (k > items.size()) return false;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  std::vector<int> subset(k);
  for (;;) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = items[idx[i]];
    if (fn(subset)) return true;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == items.size() - k + (i - 1)) --i;
    if (i == 0) return false;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace mfgsbs

#endif  // MFGSBS_PARALLEL_HPP
