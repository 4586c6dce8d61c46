#include "ensdev/parallel.hpp"

#include <atomic>

namespace ensdev {

namespace {
std::atomic<Exec> g_exec{Exec::openmp};
}

const char* exec_name(Exec e) { return e == Exec::serial ? "serial" : "openmp"; }

Exec default_exec() { return g_exec.load(std::memory_order_relaxed); }
void set_default_exec(Exec e) { g_exec.store(e, std::memory_order_relaxed); }

void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace ensdev
