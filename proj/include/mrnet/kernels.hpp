#pragma once

#include <cstddef>
#include <span>

#include "mrnet/nn_core.hpp"

// Batched dense-layer kernels over row-major blocks (rows x features).
// Each call works on one chunk of samples; callers fan chunks out across
// OpenMP threads and reduce per-chunk gradients in chunk order, which keeps
// results independent of the thread count.
namespace mrnet::kernels {

/// Samples per work chunk in every batched loop.
inline constexpr int kChunkRows = 128;

inline int chunk_count(int rows) { return (rows + kChunkRows - 1) / kChunkRows; }

/// out = in * W^T + b
void affine_forward(const DenseLayer& layer, std::span<const double> in, int rows,
                    std::span<double> out);

/// pre = scale * (in * W^T + b); act = sin(pre)
void sine_forward(const DenseLayer& layer, std::span<const double> in, int rows, double scale,
                  std::span<double> pre, std::span<double> act);

/// Accumulates dW += d_out^T in, db += sum(d_out). If d_in is non-empty it
/// is overwritten with d_out * W.
void affine_backward(const DenseLayer& layer, std::span<const double> in,
                     std::span<const double> d_out, int rows, DenseLayer* grad,
                     std::span<double> d_in);

/// Converts d_act into d(W x + b) in place: d *= scale * cos(pre).
void sine_backward_inplace(std::span<const double> pre, double scale, std::span<double> d);

/// acc[k] += w * x[k]
void axpy(double w, std::span<const double> x, std::span<double> acc);

}  // namespace mrnet::kernels
