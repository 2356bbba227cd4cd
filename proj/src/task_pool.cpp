#include "dfb/task_pool.hpp"

#include <algorithm>
#include <atomic>
#include <exception>

namespace dfb {

TaskPool::TaskPool(int threads) {
  const int n = std::max(1, threads);
  workers_.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) workers_.emplace_back([this](std::stop_token st) { run(st); });
}

TaskPool::~TaskPool() {
  for (auto& w : workers_) w.request_stop();
  cv_.notify_all();
  workers_.clear();
}

void TaskPool::submit(std::function<void()> task) {
  {
    std::lock_guard lock(mutex_);
    tasks_.push_back(std::move(task));
  }
  cv_.notify_one();
}

void TaskPool::waitIdle() {
  std::unique_lock lock(mutex_);
  idleCv_.wait(lock, [&] { return tasks_.empty() && active_ == 0; });
}

void TaskPool::run(std::stop_token stop) {
  while (true) {
    std::function<void()> task;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return !tasks_.empty() || stop.stop_requested(); });
      if (tasks_.empty()) return;
      task = std::move(tasks_.front());
      tasks_.pop_front();
      ++active_;
    }
    task();
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    idleCv_.notify_all();
  }
}

void parallelFor(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const auto n = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  if (n <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  auto worker = [&] {
    try {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) body(i);
    } catch (...) {
      std::lock_guard lock(failureMutex);
      if (!failure) failure = std::current_exception();
      next = count;
    }
  };
  {
    std::vector<std::jthread> helpers;
    for (std::size_t t = 1; t < n; ++t) helpers.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dfb
