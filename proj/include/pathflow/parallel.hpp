#pragma once

#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pathflow {

/// How a per-path loop is executed. Results never depend on these settings: every path
/// draws from its own counter-based stream and writes to its own slot.
struct Execution {
  int workers = 0;  // 0: OpenMP default
  bool serial = false;
};

/// Serial reference loop.
template <class Fn>
void for_each_path_serial(std::size_t n, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

/// Parallel loop over path indices. The first exception by path index is rethrown after
/// the loop, so failures are reported deterministically too.
template <class Fn>
void for_each_path(std::size_t n, const Execution& exec, Fn&& fn) {
#ifdef _OPENMP
  if (exec.serial || n < 2) {
    for_each_path_serial(n, fn);
    return;
  }
  std::mutex guard;
  std::exception_ptr first_error;
  std::size_t first_index = std::numeric_limits<std::size_t>::max();
  const int workers = exec.workers > 0 ? exec.workers : omp_get_max_threads();
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (static_cast<std::size_t>(i) < first_index) {
        first_index = static_cast<std::size_t>(i);
        first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
#else
  (void)exec;
  for_each_path_serial(n, fn);
#endif
}

/// Per-path map into a vector; out[i] = fn(i).
template <class T, class Fn>
std::vector<T> map_paths(std::size_t n, const Execution& exec, Fn&& fn) {
  std::vector<T> out(n);
  for_each_path(n, exec, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace pathflow
