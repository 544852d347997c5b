#pragma once

#include <cstddef>
#include <functional>

namespace uc2 {

// 0 means "use std::thread::hardware_concurrency()".
std::size_t resolve_threads(std::size_t requested) noexcept;

// Splits [0, n) into fixed chunks of `chunk` items and runs fn(chunk_index,
// begin, end) for each, spread over `threads` workers. Chunk boundaries
// depend only on n and chunk, so per-chunk partial results merged in chunk
// order are identical for any thread count.
void for_each_chunk(std::size_t n, std::size_t chunk, std::size_t threads,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) noexcept {
  return (n + chunk - 1) / chunk;
}

}  // namespace uc2
