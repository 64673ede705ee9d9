#include "capcm/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace capcm {

unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CAPCM_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    } catch (...) {
      // unparsable value: ignore the cap
    }
  }
  return n;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned workers = thread_count();
  constexpr std::size_t kMinChunk = 2048;
  if (workers <= 1 || count < 2 * kMinChunk) {
    for (std::size_t p = 0; p < count; ++p) body(p);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(workers, count / kMinChunk);
  const std::size_t per = (count + chunks - 1) / chunks;
  std::vector<std::jthread> pool;
  pool.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t lo = c * per;
    const std::size_t hi = std::min(count, lo + per);
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t p = lo; p < hi; ++p) body(p);
    });
  }
}

}  // namespace capcm
