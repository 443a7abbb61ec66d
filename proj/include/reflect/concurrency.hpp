#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace reflect {

// Counting gate limiting how many callers hold it at once.
class InFlightGate {
  public:
    explicit InFlightGate(std::size_t limit) : limit_(std::max<std::size_t>(limit, 1)) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return held_ < limit_; });
        ++held_;
        peak_ = std::max(peak_, held_);
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            --held_;
        }
        cv_.notify_one();
    }
    std::size_t peak() const {
        std::lock_guard lock(mu_);
        return peak_;
    }
    std::size_t limit() const { return limit_; }

  private:
    const std::size_t limit_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::size_t held_ = 0;
    std::size_t peak_ = 0;
};

class GateHold {
  public:
    explicit GateHold(InFlightGate& g) : gate_(g) { gate_.acquire(); }
    ~GateHold() { gate_.release(); }
    GateHold(const GateHold&) = delete;
    GateHold& operator=(const GateHold&) = delete;

  private:
    InFlightGate& gate_;
};

// Runs `fn(i)` for i in [0, n) on up to `workers` threads. The first exception thrown by
// any call is rethrown after all workers stop.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const auto i = next.fetch_add(1);
                    if (i >= n) return;
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mu);
                        if (!error) error = std::current_exception();
                        next = n;
                        return;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace reflect
