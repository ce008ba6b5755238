#include "evoclim/parallel.hpp"

#include <cstdlib>
#include <string>

namespace evoclim {

int worker_count() {
  if (const char* env = std::getenv("EVOCLIM_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
      // fall through to the runtime default
    }
  }
#ifdef EVOCLIM_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void configure_threads_from_env() {
#ifdef EVOCLIM_HAVE_OPENMP
  if (std::getenv("EVOCLIM_THREADS")) omp_set_num_threads(worker_count());
#endif
}

}  // namespace evoclim
