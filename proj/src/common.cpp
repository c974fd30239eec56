#include "namo/common.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace namo {
namespace {

std::atomic<bool> g_force_single{false};
thread_local bool g_in_pool = false;

int env_thread_count() {
  if (const char* v = std::getenv("NAMO_THREADS")) {
    int n = std::atoi(v);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Persistent pool; per-call work is handed out as chunk indices through an
// atomic counter, so chunks are disjoint regardless of which worker runs them.
class Pool {
 public:
  Pool() : size_(env_thread_count()) {
    for (int i = 0; i + 1 < size_; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lock(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int size() const { return size_; }

  void run(int chunks, const std::function<void(int)>& fn) {
    if (chunks <= 0) return;
    if (chunks == 1 || size_ == 1 || g_in_pool) {
      for (int i = 0; i < chunks; ++i) fn(i);
      return;
    }
    g_in_pool = true;
    {
      std::lock_guard<std::mutex> lock(m_);
      fn_ = &fn;
      total_ = chunks;
      next_.store(0, std::memory_order_relaxed);
      pending_ = chunks;
      ++generation_;
    }
    cv_.notify_all();
    drain();  // calling thread participates
    {
      std::unique_lock<std::mutex> lock(m_);
      done_cv_.wait(lock, [this] { return pending_ == 0; });
      fn_ = nullptr;
    }
    g_in_pool = false;
  }

 private:
  void drain() {
    while (true) {
      int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= total_) break;
      (*fn_)(i);
      if (finished_one()) break;
    }
  }

  bool finished_one() {
    std::lock_guard<std::mutex> lock(m_);
    if (--pending_ == 0) {
      done_cv_.notify_all();
      return true;
    }
    return false;
  }

  void worker_loop() {
    g_in_pool = true;
    uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock<std::mutex> lock(m_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      while (true) {
        int i = next_.fetch_add(1, std::memory_order_relaxed);
        if (i >= total_) break;
        (*fn_)(i);
        std::lock_guard<std::mutex> lock(m_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  int size_;
  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  std::atomic<int> next_{0};
  int total_ = 0;
  int pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p;
  return p;
}

}  // namespace

void force_single_thread(bool on) { g_force_single.store(on); }

int worker_count() {
  return g_force_single.load() ? 1 : pool().size();
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (worker_count() == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  pool().run(n, fn);
}

void parallel_chunks(int n, const std::function<void(int, int)>& fn) {
  if (n <= 0) return;
  int workers = worker_count();
  if (workers == 1) {
    fn(0, n);
    return;
  }
  int chunks = std::min(n, workers * 4);
  int base = n / chunks, rem = n % chunks;
  pool().run(chunks, [&](int c) {
    int begin = c * base + std::min(c, rem);
    int end = begin + base + (c < rem ? 1 : 0);
    fn(begin, end);
  });
}

}  // namespace namo
