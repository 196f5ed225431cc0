#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fvmatch {

// Worker-thread count for the pairwise kernel sums and sampling loops.
// All reductions below are bit-stable: per-item partials are combined in a
// fixed sequential order, so results do not depend on the thread count.

void set_num_threads(int n);
int num_threads();

template <class Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

/// Sum of fn(i) for i in [0,n). fn is evaluated in parallel, the partials are
/// accumulated in index order.
template <class Fn>
double parallel_sum(std::int64_t n, Fn&& fn) {
  std::vector<double> partial(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::int64_t i) { partial[static_cast<std::size_t>(i)] = fn(i); });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace fvmatch
