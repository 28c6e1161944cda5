#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace avsplat {

/// Fixed worker pool. parallel_for hands out indices dynamically, so callers
/// must write results to per-index slots; merging is the caller's job.
class ThreadPool {
public:
  explicit ThreadPool(int threads = 1);
  ~ThreadPool();
  ThreadPool(const ThreadPool &) = delete;
  ThreadPool &operator=(const ThreadPool &) = delete;

  int size() const { return threads_; }
  void parallel_for(std::size_t count, const std::function<void(std::size_t)> &fn);

private:
  void worker_loop();

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_, done_;
  const std::function<void(std::size_t)> *job_ = nullptr;
  std::size_t count_ = 0, next_ = 0, active_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

/// Runs fn over [0, count) on the pool, or inline when pool is null.
inline void parallel_for(ThreadPool *pool, std::size_t count, const std::function<void(std::size_t)> &fn) {
  if (pool && pool->size() > 1 && count > 1) {
    pool->parallel_for(count, fn);
    return;
  }
  for (std::size_t i = 0; i < count; ++i)
    fn(i);
}

} // namespace avsplat
