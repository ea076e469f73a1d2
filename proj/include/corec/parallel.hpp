#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace corec {

/// Runs fn(i) for i in [begin, end) on up to `threads` workers. Work items
/// must write to disjoint slots; results are then identical at any thread
/// count. threads <= 1 runs inline.
template <typename F>
void parallel_for(int begin, int end, int threads, F&& fn) {
  int n = end - begin;
  if (n <= 0) return;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::exception_ptr error;
  std::mutex error_mu;
  workers.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        // strided assignment keeps long-running items spread across workers
        for (int i = begin + t; i < end; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace corec
