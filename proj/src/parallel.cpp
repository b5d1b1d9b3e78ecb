#include "shiftscope/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace shiftscope {

namespace {
int g_max_threads = 0;  // 0 = not set yet
}

int max_threads() {
    if (g_max_threads > 0) return g_max_threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_max_threads(int n) {
    g_max_threads = std::max(1, n);
}

std::size_t chunk_count(std::size_t n) {
    return std::min<std::size_t>(n, 64);
}

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t chunks = chunk_count(n);
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(max_threads()), chunks);

    auto chunk_range = [&](std::size_t c) {
        const std::size_t lo = n * c / chunks;
        const std::size_t hi = n * (c + 1) / chunks;
        return std::pair<std::size_t, std::size_t>{lo, hi};
    };

    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            auto [lo, hi] = chunk_range(c);
            fn(c, lo, hi);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                auto [lo, hi] = chunk_range(c);
                fn(c, lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    parallel_chunks(n, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace shiftscope
