#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dfb {

/// Fixed-size FIFO worker pool.
class TaskPool {
 public:
  explicit TaskPool(int threads);
  ~TaskPool();

  TaskPool(const TaskPool&) = delete;
  TaskPool& operator=(const TaskPool&) = delete;

  int threads() const { return static_cast<int>(workers_.size()); }
  void submit(std::function<void()> task);
  void waitIdle();

 private:
  void run(std::stop_token stop);

  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idleCv_;
  std::deque<std::function<void()>> tasks_;
  std::size_t active_ = 0;
  std::vector<std::jthread> workers_;
};

/// Runs body(i) for i in [0, count) on up to `threads` threads, including the caller.
void parallelFor(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace dfb
