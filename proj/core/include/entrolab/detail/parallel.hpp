#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace entrolab::detail {

/// Runs fn(0..n-1) on up to `workers` threads. Work items are claimed
/// dynamically but each index writes only its own slot, so results do not
/// depend on scheduling. The first exception wins and is rethrown here.
template <class F>
void parallel_for(Eigen::Index n, int workers, F&& fn) {
  if (n <= 0) return;
  const int threads = static_cast<int>(std::min<Eigen::Index>(std::max(workers, 1), n));
  if (threads <= 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const Eigen::Index i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

} // namespace entrolab::detail
