#ifndef HBAB_PARALLEL_HPP
#define HBAB_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <mutex>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace hbab {

// Every kernel that loops over independent work items takes one of these.
// `serial` is the reference path kept for testing; results are identical
// between the two because no item reads another item's output.
enum class Execution { serial, parallel };

inline bool openmp_enabled() {
#if defined(_OPENMP)
  return true;
#else
  return false;
#endif
}

inline int worker_count() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Reads HBAB_NUM_THREADS and applies it to the OpenMP runtime.
void configure_workers_from_env();

template <class Body>
void for_each_index(Execution exec, std::size_t n, Body&& body) {
  if (exec == Execution::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
#if defined(_OPENMP)
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace hbab

#endif  // HBAB_PARALLEL_HPP
