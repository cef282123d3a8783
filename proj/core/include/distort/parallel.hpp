#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace distort {

// Runs body(b) for b in [0, count) on up to `threads` workers. Each index is
// handled exactly once; callers write into slot b so reductions can proceed in
// index order afterwards.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t b = 0; b < count; ++b) body(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= count) return;
      try {
        body(b);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct BatchStats {
  double mean = 0.0;
  double std_error = 0.0;
};

// Mean and batch-means standard error from equally sized batch means.
inline BatchStats batch_stats(const std::vector<double>& batch_means) {
  BatchStats s;
  const double n = static_cast<double>(batch_means.size());
  if (batch_means.empty()) return s;
  for (double m : batch_means) s.mean += m;
  s.mean /= n;
  if (batch_means.size() < 2) return s;
  double ss = 0.0;
  for (double m : batch_means) ss += (m - s.mean) * (m - s.mean);
  s.std_error = std::sqrt(ss / (n - 1.0) / n);
  return s;
}

}  // namespace distort
