#include "tomopair/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace tomopair {

namespace {

std::atomic<std::size_t> g_threads{1};
thread_local bool t_in_job = false;

// Lazily started pool; workers sleep until a parallel_for hands them a chunk.
class Pool {
public:
    static Pool& instance() {
        static Pool pool;
        return pool;
    }

    void run(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& fn) {
        ensure_workers(workers - 1);
        std::size_t chunk = (n + workers - 1) / workers;
        {
            std::unique_lock lock(mutex_);
            job_fn_ = &fn;
            job_n_ = n;
            job_chunk_ = chunk;
            next_chunk_.store(0, std::memory_order_relaxed);
            pending_ = workers - 1;
            ++generation_;
        }
        cv_.notify_all();
        work(n, chunk); // main thread participates
        std::unique_lock lock(mutex_);
        done_cv_.wait(lock, [&] { return pending_ == 0; });
        job_fn_ = nullptr;
    }

private:
    Pool() = default;
    ~Pool() {
        {
            std::unique_lock lock(mutex_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void ensure_workers(std::size_t count) {
        std::unique_lock lock(mutex_);
        while (threads_.size() < count) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t, std::size_t)>* fn = nullptr;
            std::size_t n = 0, chunk = 0;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                fn = job_fn_;
                n = job_n_;
                chunk = job_chunk_;
            }
            if (fn) work(n, chunk);
            {
                std::unique_lock lock(mutex_);
                if (pending_ > 0 && --pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    void work(std::size_t n, std::size_t chunk) {
        t_in_job = true;
        for (;;) {
            std::size_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
            std::size_t begin = c * chunk;
            if (begin >= n) break;
            std::size_t end = std::min(n, begin + chunk);
            (*job_fn_)(begin, end);
        }
        t_in_job = false;
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(std::size_t, std::size_t)>* job_fn_ = nullptr;
    std::size_t job_n_ = 0;
    std::size_t job_chunk_ = 0;
    std::atomic<std::size_t> next_chunk_{0};
    std::size_t pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

} // namespace

void set_thread_count(std::size_t n) {
    g_threads.store(n == 0 ? 1 : n, std::memory_order_relaxed);
}

std::size_t thread_count() {
    return g_threads.load(std::memory_order_relaxed);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1 || t_in_job) { // nested calls run inline
        fn(0, n);
        return;
    }
    Pool::instance().run(n, workers, fn);
}

void parallel_for_each(std::size_t n, const std::function<void(std::size_t)>& fn) {
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
    });
}

} // namespace tomopair
