#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace blindspot {

// Upper bound on worker threads. BLINDSPOT_THREADS caps it; otherwise the
// hardware concurrency is used.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BLINDSPOT_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
    } catch (...) {
      // ignore unparsable values
    }
  }
  return n;
}

// Splits [0, n) into contiguous chunks and runs fn(begin, end, chunk) for each.
// Chunk boundaries depend only on n and the chunk count, never on timing.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned chunks, Fn&& fn) {
  chunks = static_cast<unsigned>(std::clamp<std::size_t>(chunks, 1, std::max<std::size_t>(n, 1)));
  if (chunks == 1) {
    fn(std::size_t{0}, n, 0u);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(chunks);
  threads.reserve(chunks);
  for (unsigned c = 0; c < chunks; ++c) {
    const std::size_t begin = n * c / chunks;
    const std::size_t end = n * (c + 1) / chunks;
    threads.emplace_back([&, begin, end, c] {
      try {
        fn(begin, end, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace blindspot
