#include "fvmatch/parallel.hpp"

#include <atomic>

namespace fvmatch {

namespace {
std::atomic<int> g_threads{0};  // 0 = library default
}

void set_num_threads(int n) { g_threads.store(n > 0 ? n : 0); }

int num_threads() {
  int n = g_threads.load();
#ifdef _OPENMP
  if (n <= 0) n = omp_get_max_threads();
#else
  if (n <= 0) n = 1;
#endif
  return n;
}

}  // namespace fvmatch
