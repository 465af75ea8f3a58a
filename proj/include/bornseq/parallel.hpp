#pragma once

#include <cstddef>
#include <functional>

namespace bornseq {

/// Worker count: BORNSEQ_THREADS if set and positive, otherwise the hardware
/// concurrency (0 in the variable means auto).
unsigned thread_count();

/// Calls fn(chunk_begin, chunk_end, chunk_index) for consecutive chunks of
/// [0, count) with a fixed chunk size. Chunk boundaries do not depend on the
/// thread count, so callers that reduce per-chunk results in chunk order get
/// bit-identical sums regardless of parallelism.
void parallel_chunks(std::size_t count, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t chunk_count(std::size_t count, std::size_t chunk_size) {
  return (count + chunk_size - 1) / chunk_size;
}

}  // namespace bornseq
