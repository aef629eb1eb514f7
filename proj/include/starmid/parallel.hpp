#pragma once

// Thin OpenMP shim so translation units build identically with or without
// -fopenmp. Parallel loops in this project write to preallocated slots and
// reduce in index order, so results do not depend on the thread count.
#if defined(_OPENMP)
#include <omp.h>
namespace starmid {
constexpr bool use_omp = true;
}
#else
namespace starmid {
constexpr bool use_omp = false;
}
inline int omp_get_thread_num() { return 0; }
inline int omp_get_max_threads() { return 1; }
inline int omp_get_num_threads() { return 1; }
inline void omp_set_num_threads(int) {}
#endif

namespace starmid {

inline void set_thread_count(int n) {
  if (n > 0)
    omp_set_num_threads(n);
}

inline int max_thread_count() { return omp_get_max_threads(); }

} // namespace starmid
