#pragma once

#include <cstddef>
#include <functional>

namespace modered {

// requested == 0 picks the hardware concurrency; the result is always >= 1.
int resolve_thread_count(int requested);

// Splits [0, n) into `threads` contiguous chunks and runs
// body(chunk_index, begin, end) once per chunk, each chunk on its own
// worker.  With threads <= 1 the single chunk runs inline on the calling
// thread, so single-threaded execution is bitwise reproducible.  Chunk
// boundaries depend only on (n, threads): results are reproducible for a
// fixed thread count, and callers that keep one partial accumulator per
// chunk and merge them in chunk order stay deterministic.
//
// The first exception thrown by any chunk (lowest chunk index wins) is
// rethrown on the calling thread after all workers join.
void parallel_chunks(
    std::size_t n, int threads,
    const std::function<void(std::size_t chunk, std::size_t begin,
                             std::size_t end)>& body);

}  // namespace modered
