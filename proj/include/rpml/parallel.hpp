#ifndef RPML_PARALLEL_HPP_
#define RPML_PARALLEL_HPP_

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rpml {

// Runs fn(i) for i in [0, n) on up to `threads` workers, contiguous block
// per worker. Callers must write only to slot i, so the result is identical
// for any thread count.
template <typename F>
void parallel_for(int n, int threads, F&& fn) {
    if (threads <= 1 || n < 2) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    const int workers = std::min(threads, n);
    const int block = (n + workers - 1) / workers;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int lo = w * block;
        const int hi = std::min(n, lo + block);
        pool.emplace_back([&, lo, hi] {
            try {
                for (int i = lo; i < hi; ++i)
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace rpml

#endif // RPML_PARALLEL_HPP_
