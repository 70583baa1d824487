#pragma once

#include <exception>
#include <mutex>

namespace panofuse {

// Worker budget for the data-parallel kernels. jobs <= 1 runs the serial
// reference path; any job count produces bit-identical results because every
// kernel writes disjoint outputs and reductions run in a fixed order.
struct Exec {
  int jobs = 1;

  static Exec Serial() { return Exec{1}; }
  static Exec Parallel(int jobs) { return Exec{jobs}; }
  bool serial() const { return jobs <= 1; }
};

int HardwareJobs();

template <typename Fn>
void ParallelFor(int n, const Exec& exec, Fn&& fn) {
  if (exec.serial() || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  // The lowest failing index wins so error reports do not depend on timing.
  std::exception_ptr failure;
  int failed_at = n;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic, 1) num_threads(exec.jobs)
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (i < failed_at) {
        failed_at = i;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace panofuse
