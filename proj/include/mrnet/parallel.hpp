#pragma once

#include <algorithm>
#include <exception>

#include "mrnet/kernels.hpp"

namespace mrnet {

/// Runs fn(chunk, begin_row, row_count) for every fixed-size chunk of `rows`
/// on the OpenMP team. The first exception thrown by any chunk is rethrown
/// on the calling thread.
template <class Fn>
void parallel_for_chunks(int rows, Fn&& fn) {
  const int chunks = kernels::chunk_count(rows);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < chunks; ++c) {
    try {
      const int begin = c * kernels::kChunkRows;
      fn(c, begin, std::min(kernels::kChunkRows, rows - begin));
    } catch (...) {
#pragma omp critical(mrnet_chunk_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace mrnet
