#pragma once

#include "wgf/core.hpp"

#include <exception>

namespace wgf::detail {

// Runs fn(i) for i in [0, n), in parallel when requested. Exceptions thrown
// inside the loop are captured and the one from the lowest index is
// rethrown afterwards, so error reporting does not depend on scheduling.
template <class Fn>
void parallel_for(Eigen::Index n, Exec exec, Fn&& fn) {
  std::exception_ptr error;
  Eigen::Index error_index = n;
#pragma omp parallel for schedule(dynamic, 4) if (exec == Exec::Parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(wgf_parallel_for_error)
      {
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace wgf::detail
