#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vigc {

/// Calls work(i) for every i in [0, n) on at most `workers` threads, then
/// done(i) serialized under one lock. Indices are claimed in increasing
/// order; once *cancel is set no new index is claimed. The first exception
/// thrown by work or done is rethrown after all threads join.
template <typename Work, typename Done>
void run_indexed(std::size_t n, int workers, Work&& work, Done&& done, const std::atomic<bool>* cancel = nullptr) {
  std::atomic<std::size_t> next{0};
  std::mutex done_mu;
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto loop = [&] {
    for (;;) {
      if (cancel != nullptr && cancel->load()) return;
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        work(i);
        std::lock_guard lock(done_mu);
        done(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::min(threads, n));
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(loop);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace vigc
