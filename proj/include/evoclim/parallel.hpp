#pragma once
// Execution-policy switch shared by the data-parallel kernels. Every kernel
// with a `Policy::parallel` path keeps a `Policy::serial` reference that the
// tests compare against bit for bit.

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef EVOCLIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace evoclim {

enum class Policy { serial, parallel };

/// Worker count: EVOCLIM_THREADS when set and positive, else the OpenMP default.
int worker_count();
/// Applies EVOCLIM_THREADS to the OpenMP runtime (no-op without OpenMP).
void configure_threads_from_env();

/// Runs body(i) for i in [0, n). Exceptions thrown by any iteration are
/// captured and the first one (lowest index) is rethrown on the caller.
template <class Body>
void for_each_index(std::size_t n, Policy policy, Body&& body) {
  if (policy == Policy::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::size_t first_index = n;
  std::mutex guard;
  const auto count = static_cast<long long>(n);
#ifdef EVOCLIM_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (static_cast<std::size_t>(i) < first_index) {
        first_index = static_cast<std::size_t>(i);
        first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace evoclim
