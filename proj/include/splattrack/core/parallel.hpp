// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <functional>

namespace splattrack {

/// Worker count used by parallel_for_chunks; 0 selects the hardware count.
void set_num_threads(std::size_t n);
std::size_t num_threads();

inline std::size_t chunk_count(std::size_t n, std::size_t grain) { return grain == 0 ? 0 : (n + grain - 1) / grain; }

/// Calls fn(chunk, begin, end) for every chunk [chunk*grain, min(n, (chunk+1)*grain)).
/// Chunk boundaries depend only on (n, grain), never on the thread count, so
/// per-chunk partial results reduced in chunk order are bit-identical for any
/// number of workers.
void parallel_for_chunks(std::size_t n, std::size_t grain,
                         const std::function<void(std::size_t chunk, std::size_t begin, std::size_t end)> &fn);

} // namespace splattrack
