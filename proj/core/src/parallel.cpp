#include "ordsurf/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace ordsurf {

namespace {

thread_local bool inside_worker = false;

class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this] { run(); });
    }
  }

  ~Pool() {
    {
      std::unique_lock lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void dispatch(std::int64_t n, int chunks,
                const std::function<void(std::int64_t, std::int64_t)>& fn) {
    std::int64_t chunk = (n + chunks - 1) / chunks;
    {
      std::unique_lock lk(mu_);
      fn_ = &fn;
      total_ = n;
      chunk_ = chunk;
      next_ = 0;
      pending_ = (n + chunk - 1) / chunk;
      generation_++;
    }
    cv_.notify_all();
    // The calling thread works too.
    while (run_one()) {
    }
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  bool run_one() {
    std::int64_t begin, end;
    const std::function<void(std::int64_t, std::int64_t)>* fn;
    {
      std::unique_lock lk(mu_);
      if (fn_ == nullptr || next_ >= total_) return false;
      begin = next_;
      end = std::min<std::int64_t>(total_, begin + chunk_);
      next_ = end;
      fn = fn_;
    }
    inside_worker = true;
    (*fn)(begin, end);
    inside_worker = false;
    {
      std::unique_lock lk(mu_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
    return true;
  }

  void run() {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      while (run_one()) {
      }
    }
  }

  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(std::int64_t, std::int64_t)>* fn_ = nullptr;
  std::int64_t total_ = 0, chunk_ = 0, next_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace

int worker_threads() {
  static const int n = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("ORDSURF_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
  }();
  return n;
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  const int workers = worker_threads();
  if (workers == 1 || n == 1 || inside_worker) {
    fn(0, n);
    return;
  }
  // Extra workers beyond the caller; pool is created once.
  static Pool pool(worker_threads() - 1);
  pool.dispatch(n, workers, fn);
}

}  // namespace ordsurf
