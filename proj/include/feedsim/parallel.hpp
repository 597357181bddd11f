#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace feedsim {

/// Splits [0, count) into at most `workers` contiguous chunks and runs
/// fn(chunk_index, begin, end) for each on its own thread. Chunk boundaries
/// depend only on (count, workers). The first exception by chunk order is
/// rethrown after all threads join.
template <class Fn>
void for_each_chunk(std::size_t count, std::size_t workers, Fn&& fn) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min(workers, count));
  if (chunks == 1) {
    fn(std::size_t{0}, std::size_t{0}, count);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> threads;
    threads.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t begin = count * c / chunks;
      const std::size_t end = count * (c + 1) / chunks;
      threads.emplace_back([&, c, begin, end] {
        try {
          fn(c, begin, end);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Number of chunks for_each_chunk will use.
inline std::size_t chunk_count(std::size_t count, std::size_t workers) {
  return std::max<std::size_t>(1, std::min(workers, count));
}

}  // namespace feedsim
