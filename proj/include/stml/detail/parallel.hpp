#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace stml::detail {

// Runs body(i) for i in [0, n). Each index is handled by exactly one worker,
// so bodies that only write slot i give results independent of `threads`.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    const std::size_t count = std::min(workers, n);
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += count) body(i);
        });
    }
}

}  // namespace stml::detail
