// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/core/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace splattrack {

namespace {
std::atomic<std::size_t> gThreads{0};
}

void
set_num_threads(std::size_t n) {
    gThreads.store(n);
}

std::size_t
num_threads() {
    const std::size_t n = gThreads.load();
    if (n != 0) {
        return n;
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void
parallel_for_chunks(std::size_t n, std::size_t grain,
                    const std::function<void(std::size_t, std::size_t, std::size_t)> &fn) {
    const std::size_t chunks = chunk_count(n, grain);
    const std::size_t workers = std::min(num_threads(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            fn(c, c * grain, std::min(n, (c + 1) * grain));
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex errorMutex;
    auto work = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) {
                return;
            }
            try {
                fn(c, c * grain, std::min(n, (c + 1) * grain));
            } catch (...) {
                std::lock_guard lock(errorMutex);
                if (!error) {
                    error = std::current_exception();
                }
                next.store(chunks);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 0; t + 1 < workers; ++t) {
        pool.emplace_back(work);
    }
    work();
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace splattrack
