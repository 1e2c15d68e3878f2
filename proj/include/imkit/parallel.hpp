#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace imkit {

/// Draws per random stream. Monte Carlo loops split work into blocks of this size,
/// block b always using stream b, so results do not depend on the worker count.
inline constexpr std::size_t kBlockSize = 2048;

namespace detail {

inline std::size_t env_thread_count() {
  if (const char* env = std::getenv("IMKIT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

inline std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> value{0};
  return value;
}

}  // namespace detail

/// Worker cap for parallel loops; 0 restores the default (IMKIT_THREADS or hardware).
inline void set_thread_count(std::size_t threads) { detail::thread_setting() = threads; }

inline std::size_t thread_count() {
  const std::size_t v = detail::thread_setting();
  return v > 0 ? v : detail::env_thread_count();
}

inline std::size_t block_count(std::size_t n_items, std::size_t block = kBlockSize) {
  return (n_items + block - 1) / block;
}

/// Calls fn(task) for task in [0, n_tasks) across worker threads. The first
/// exception thrown by any task is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n_tasks, Fn&& fn) {
  const std::size_t workers = std::min(thread_count(), n_tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= n_tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_tasks;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Splits [0, n_items) into kBlockSize blocks, evaluates fn(block, begin, end)
/// for each in parallel and returns the per-block results in block order.
template <class Fn>
auto map_blocks(std::size_t n_items, Fn&& fn) {
  using Result = decltype(fn(std::size_t{}, std::size_t{}, std::size_t{}));
  const std::size_t blocks = block_count(n_items);
  std::vector<Result> out(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t begin = b * kBlockSize;
    out[b] = fn(b, begin, std::min(n_items, begin + kBlockSize));
  });
  return out;
}

}  // namespace imkit
