#include "avsplat/thread_pool.hpp"

#include <cstdint>

namespace avsplat {

ThreadPool::ThreadPool(int threads) : threads_(threads < 1 ? 1 : threads) {
  for (int i = 1; i < threads_; ++i)
    workers_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto &w : workers_)
    w.join();
}

void ThreadPool::worker_loop() {
  std::uint64_t seen = 0;
  for (;;) {
    std::unique_lock lock(mutex_);
    wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
    if (stop_)
      return;
    seen = generation_;
    ++active_;
    while (next_ < count_) {
      const std::size_t i = next_++;
      lock.unlock();
      (*job_)(i);
      lock.lock();
    }
    if (--active_ == 0)
      done_.notify_all();
  }
}

void ThreadPool::parallel_for(std::size_t count, const std::function<void(std::size_t)> &fn) {
  std::unique_lock lock(mutex_);
  job_ = &fn;
  count_ = count;
  next_ = 0;
  ++generation_;
  ++active_; // the calling thread participates
  wake_.notify_all();
  while (next_ < count_) {
    const std::size_t i = next_++;
    lock.unlock();
    fn(i);
    lock.lock();
  }
  --active_;
  done_.wait(lock, [&] { return active_ == 0 && next_ >= count_; });
  job_ = nullptr;
}

} // namespace avsplat
