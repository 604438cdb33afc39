#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace wassrates {

// Worker cap from WASSRATES_THREADS, defaulting to the hardware count.
inline unsigned harness_threads() {
  if (const char* env = std::getenv("WASSRATES_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs body(0..count-1) across workers. Each replica derives its own seed and
// writes into caller-indexed slots, so reductions stay deterministic.
inline void parallel_replicas(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(harness_threads(), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace wassrates
