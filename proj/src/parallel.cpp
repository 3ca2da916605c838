#include "rism/parallel.hpp"

#include <cstdlib>
#include <string>

namespace rism::par {

void set_threads_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("RISM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace rism::par
