#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gexp {

/// Worker cap: GEXP_THREADS if set to a positive integer, else the hardware count.
inline std::size_t worker_count() {
    if (const char* env = std::getenv("GEXP_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Fixed-size partition of [0, n) into chunks. Chunk boundaries depend only
/// on n and the chunk size, never on the worker count, so any reduction done
/// chunk-by-chunk in index order is bitwise reproducible.
inline constexpr std::size_t kChunkSize = 1024;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kChunkSize) {
    return (n + chunk - 1) / chunk;
}

/// Calls fn(chunk_index, begin, end) for every chunk, spread over workers.
template <class Fn>
void for_each_chunk(std::size_t n, Fn&& fn, std::size_t chunk = kChunkSize) {
    const std::size_t chunks = chunk_count(n, chunk);
    const std::size_t workers = std::min(worker_count(), chunks);
    auto run = [&](std::size_t c) { fn(c, c * chunk, std::min(n, (c + 1) * chunk)); };
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run(c);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t c = w; c < chunks; c += workers) run(c);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Pairwise-free, order-fixed sum of per-chunk partials.
template <class T>
T ordered_sum(const std::vector<T>& partials, T zero = T{}) {
    for (const auto& p : partials) zero += p;
    return zero;
}

}  // namespace gexp
