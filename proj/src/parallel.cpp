#include "parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace vxr {
namespace {

thread_local bool g_in_worker = false;

class Pool {
public:
    explicit Pool(int workers) {
        threads_.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    int width() const { return static_cast<int>(threads_.size()) + 1; }

    // Serializes whole jobs; a caller that cannot take the slot runs inline.
    bool try_run(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
        if (!run_mu_.try_lock()) return false;
        run(n, fn);
        run_mu_.unlock();
        return true;
    }

private:
    void run(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
        const int chunks = width();
        const std::int64_t step = (n + chunks - 1) / chunks;
        {
            std::lock_guard<std::mutex> lk(mu_);
            job_fn_ = &fn;
            job_n_ = n;
            job_step_ = step;
            next_chunk_ = 1;  // chunk 0 belongs to the calling thread
            pending_ = 0;
            for (int c = 1; c < chunks; ++c) {
                if (static_cast<std::int64_t>(c) * step < n) ++pending_;
            }
            active_ = pending_;
            ++generation_;
        }
        cv_.notify_all();
        fn(0, std::min<std::int64_t>(step, n));
        std::unique_lock<std::mutex> lk(mu_);
        done_cv_.wait(lk, [this] { return active_ == 0; });
        job_fn_ = nullptr;
    }

    void worker_loop() {
        g_in_worker = true;
        std::uint64_t seen = 0;
        for (;;) {
            std::int64_t begin = -1, end = -1;
            const std::function<void(std::int64_t, std::int64_t)>* fn = nullptr;
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || (generation_ != seen && next_chunk_ * job_step_ < job_n_); });
                if (stop_) return;
                const std::int64_t c = next_chunk_++;
                begin = c * job_step_;
                end = std::min<std::int64_t>(begin + job_step_, job_n_);
                if (next_chunk_ * job_step_ >= job_n_) seen = generation_;
                fn = job_fn_;
            }
            (*fn)(begin, end);
            {
                std::lock_guard<std::mutex> lk(mu_);
                if (--active_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex run_mu_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::int64_t, std::int64_t)>* job_fn_ = nullptr;
    std::int64_t job_n_ = 0;
    std::int64_t job_step_ = 0;
    std::int64_t next_chunk_ = 0;
    int pending_ = 0;
    int active_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

int g_requested_threads = 0;
Pool* g_pool = nullptr;
std::mutex g_pool_mu;

int default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

Pool* pool() {
    std::lock_guard<std::mutex> lk(g_pool_mu);
    const int want = g_requested_threads > 0 ? g_requested_threads : default_threads();
    if (g_pool == nullptr || g_pool->width() != want) {
        delete g_pool;
        g_pool = new Pool(want - 1);
    }
    return g_pool;
}

}  // namespace

void set_thread_count(int n) {
    std::lock_guard<std::mutex> lk(g_pool_mu);
    g_requested_threads = n < 0 ? 0 : n;
}

int thread_count() {
    std::lock_guard<std::mutex> lk(g_pool_mu);
    return g_requested_threads > 0 ? g_requested_threads : default_threads();
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (g_in_worker || n == 1 || thread_count() == 1) {
        fn(0, n);
        return;
    }
    if (!pool()->try_run(n, fn)) fn(0, n);
}

}  // namespace vxr
