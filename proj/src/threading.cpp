#include "modered/threading.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace modered {

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(
    std::size_t n, int threads,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t n_chunks =
      std::min<std::size_t>(std::max(threads, 1), n);
  if (n_chunks == 1) {
    body(0, 0, n);
    return;
  }

  // Contiguous chunks, sizes differing by at most one.
  const std::size_t base = n / n_chunks;
  const std::size_t extra = n % n_chunks;
  std::vector<std::exception_ptr> errors(n_chunks);
  std::vector<std::thread> workers;
  workers.reserve(n_chunks);
  std::size_t begin = 0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const std::size_t end = begin + base + (c < extra ? 1 : 0);
    workers.emplace_back([&, c, begin, end]() {
      try {
        body(c, begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& w : workers) w.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace modered
