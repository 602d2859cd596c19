#include "densedet/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>

namespace densedet {

namespace {
std::atomic<int> g_override{0};
}  // namespace

int thread_count() {
  if (const int forced = g_override.load(); forced > 0) return forced;
  if (const char* env = std::getenv("DENSEDET_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

void set_thread_count(int threads) { g_override.store(threads > 0 ? threads : 0); }

}  // namespace densedet
