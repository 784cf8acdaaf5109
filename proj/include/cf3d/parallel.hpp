#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cf3d {

// Worker count: CF3D_THREADS env wins, then an explicit set_thread_count,
// then hardware concurrency.
inline int& thread_count_override() {
    static int v = 0;
    return v;
}

inline void set_thread_count(int n) { thread_count_override() = n; }

inline int thread_count() {
    if (const char* env = std::getenv("CF3D_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    if (thread_count_override() > 0) return thread_count_override();
    int hw = int(std::thread::hardware_concurrency());
    return hw > 0 ? hw : 1;
}

namespace detail {

// Persistent pool; the calling thread works too. Not reentrant: parallel
// sections must not nest.
class ThreadPool {
  public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    void run(size_t n, const std::function<void(size_t)>& fn, int workers) {
        if (n == 0) return;
        ensure_workers(workers - 1);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            fn_ = &fn;
            total_ = n;
            next_.store(0, std::memory_order_relaxed);
            pending_.store(int(threads_.size()), std::memory_order_relaxed);
            ++generation_;
        }
        cv_.notify_all();
        for (;;) {
            size_t i = next_.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) break;
            fn(i);
        }
        std::unique_lock<std::mutex> lock(mutex_);
        done_cv_.wait(lock, [&] { return pending_.load(std::memory_order_acquire) == 0; });
        fn_ = nullptr;
    }

  private:
    ThreadPool() = default;
    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void ensure_workers(int count) {
        if (count <= int(threads_.size())) return;
        std::lock_guard<std::mutex> lock(mutex_);
        while (int(threads_.size()) < count) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    void worker_loop() {
        uint64_t seen = 0;
        for (;;) {
            const std::function<void(size_t)>* fn = nullptr;
            size_t total = 0;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                fn = fn_;
                total = total_;
            }
            if (fn) {
                for (;;) {
                    size_t i = next_.fetch_add(1, std::memory_order_relaxed);
                    if (i >= total) break;
                    (*fn)(i);
                }
            }
            if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
                std::lock_guard<std::mutex> lock(mutex_);
                done_cv_.notify_all();
            }
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_, done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(size_t)>* fn_ = nullptr;
    size_t total_ = 0;
    std::atomic<size_t> next_{0};
    std::atomic<int> pending_{0};
    uint64_t generation_ = 0;
    bool stop_ = false;
};

}  // namespace detail

// Runs fn(i) for i in [0, n). Work items are claimed dynamically but every
// item is independent, so results must be written to disjoint slots; any
// cross-item reduction has to be merged by the caller in index order.
// Parallel sections must not nest.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    int workers = int(std::min<size_t>(size_t(thread_count()), n));
    if (workers <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    detail::ThreadPool::instance().run(n, fn, workers);
}

}  // namespace cf3d
