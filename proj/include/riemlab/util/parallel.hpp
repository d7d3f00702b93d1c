#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace riemlab {

/// Process-wide worker count. Reductions are bitwise independent of this
/// value: work is split into fixed-size chunks and chunk results are
/// combined in a fixed pairwise tree, so only wall time changes.
inline int& thread_count() {
    static int n = 1;
    return n;
}

inline void set_thread_count(int n) {
    if (n < 1) throw std::invalid_argument("thread count must be >= 1");
    thread_count() = n;
}

namespace detail {
constexpr std::size_t kChunk = 4096;  // items per chunk, independent of workers

inline std::size_t chunk_count(std::size_t n) {
    return (n + kChunk - 1) / kChunk;
}

// Runs fn(chunk_index) for every chunk on the configured workers.
inline void for_each_chunk(std::size_t n_items, const std::function<void(std::size_t)>& fn) {
    const std::size_t nchunks = chunk_count(n_items);
    const int nthreads = std::min<int>(thread_count(), static_cast<int>(nchunks));
    if (nthreads <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c) fn(c);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    std::exception_ptr err;
    std::mutex err_mu;
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t c = t; c < nchunks; c += nthreads) fn(c);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}
}  // namespace detail

/// Parallel loop over [0, n). body must be safe to call concurrently for
/// distinct indices.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    detail::for_each_chunk(n, [&](std::size_t c) {
        const std::size_t lo = c * detail::kChunk;
        const std::size_t hi = std::min(n, lo + detail::kChunk);
        for (std::size_t i = lo; i < hi; ++i) body(i);
    });
}

/// Deterministic reduction: per-chunk sequential accumulation, then a
/// pairwise tree over chunk partials in index order. The combine shape
/// depends only on n, never on the worker count.
template <typename T, typename Map, typename Combine>
T parallel_reduce(std::size_t n, T init, Map&& map, Combine&& combine) {
    const std::size_t nchunks = detail::chunk_count(n);
    if (nchunks == 0) return init;
    std::vector<T> partial(nchunks, init);
    detail::for_each_chunk(n, [&](std::size_t c) {
        const std::size_t lo = c * detail::kChunk;
        const std::size_t hi = std::min(n, lo + detail::kChunk);
        T acc = init;
        for (std::size_t i = lo; i < hi; ++i) acc = combine(acc, map(i));
        partial[c] = acc;
    });
    // pairwise tree over chunk partials
    std::size_t width = nchunks;
    while (width > 1) {
        const std::size_t half = (width + 1) / 2;
        for (std::size_t i = 0; i + half < width; ++i)
            partial[i] = combine(partial[i], partial[i + half]);
        width = half;
    }
    return partial[0];
}

inline double parallel_sum(std::size_t n, const std::function<double(std::size_t)>& f) {
    return parallel_reduce<double>(n, 0.0, f, [](double a, double b) { return a + b; });
}

inline double parallel_max(std::size_t n, const std::function<double(std::size_t)>& f) {
    return parallel_reduce<double>(
        n, -std::numeric_limits<double>::infinity(), f,
        [](double a, double b) { return a > b ? a : b; });
}

}  // namespace riemlab
