#pragma once

// Minimal deterministic parallel loop. Each index writes only its own
// output slot, so results do not depend on the thread count.
// DEVBAND_THREADS caps the number of worker threads (default: hardware).

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace devband {

inline unsigned thread_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char *env = std::getenv("DEVBAND_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap >= 1) hw = std::min(hw, unsigned(cap));
        } catch (...) {
        }
    }
    return hw;
}

template <class F>
void parallel_for(std::size_t count, F &&body, std::size_t min_chunk = 256) {
    const unsigned threads = std::min<std::size_t>(thread_count(), std::max<std::size_t>(1, count / min_chunk));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk, hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto &th : pool) th.join();
}

} // namespace devband
