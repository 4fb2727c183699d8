#include "mrnet/kernels.hpp"

#include <cmath>

#include "mrnet/errors.hpp"

namespace mrnet::kernels {

namespace {

// Dot product with a fixed lane split; the order is fixed at compile time so
// results are reproducible run to run.
inline double dot(const double* __restrict a, const double* __restrict b, int n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (int k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

void check_block(const DenseLayer& layer, std::size_t in_size, std::size_t out_size, int rows) {
  require(rows >= 0, "kernel: negative row count");
  require(in_size >= static_cast<std::size_t>(rows) * layer.in_dim(), "kernel: input block too small");
  require(out_size >= static_cast<std::size_t>(rows) * layer.out_dim(),
          "kernel: output block too small");
}

}  // namespace

void affine_forward(const DenseLayer& layer, std::span<const double> in, int rows,
                    std::span<double> out) {
  check_block(layer, in.size(), out.size(), rows);
  const int n_in = layer.in_dim();
  const int n_out = layer.out_dim();
  const double* w = layer.weights().data();
  const double* b = layer.bias().data();
  for (int s = 0; s < rows; ++s) {
    const double* x = in.data() + static_cast<std::size_t>(s) * n_in;
    double* y = out.data() + static_cast<std::size_t>(s) * n_out;
    for (int o = 0; o < n_out; ++o) y[o] = b[o] + dot(w + static_cast<std::size_t>(o) * n_in, x, n_in);
  }
}

void sine_forward(const DenseLayer& layer, std::span<const double> in, int rows, double scale,
                  std::span<double> pre, std::span<double> act) {
  affine_forward(layer, in, rows, pre);
  const std::size_t n = static_cast<std::size_t>(rows) * layer.out_dim();
  require(act.size() >= n, "sine_forward: activation block too small");
  for (std::size_t k = 0; k < n; ++k) {
    pre[k] *= scale;
    act[k] = std::sin(pre[k]);
  }
}

void affine_backward(const DenseLayer& layer, std::span<const double> in,
                     std::span<const double> d_out, int rows, DenseLayer* grad,
                     std::span<double> d_in) {
  check_block(layer, in.size(), d_out.size(), rows);
  const int n_in = layer.in_dim();
  const int n_out = layer.out_dim();
  if (grad != nullptr) {
    require(grad->same_shape(layer), "affine_backward: gradient shape mismatch");
    double* gw = grad->weights().data();
    double* gb = grad->bias().data();
    for (int s = 0; s < rows; ++s) {
      const double* x = in.data() + static_cast<std::size_t>(s) * n_in;
      const double* d = d_out.data() + static_cast<std::size_t>(s) * n_out;
      for (int o = 0; o < n_out; ++o) {
        const double g = d[o];
        gb[o] += g;
        double* __restrict row = gw + static_cast<std::size_t>(o) * n_in;
#pragma omp simd
        for (int i = 0; i < n_in; ++i) row[i] += g * x[i];
      }
    }
  }
  if (!d_in.empty()) {
    require(d_in.size() >= static_cast<std::size_t>(rows) * n_in, "affine_backward: d_in too small");
    const double* w = layer.weights().data();
    for (int s = 0; s < rows; ++s) {
      const double* d = d_out.data() + static_cast<std::size_t>(s) * n_out;
      double* __restrict dx = d_in.data() + static_cast<std::size_t>(s) * n_in;
      for (int i = 0; i < n_in; ++i) dx[i] = 0.0;
      for (int o = 0; o < n_out; ++o) {
        const double g = d[o];
        const double* __restrict wr = w + static_cast<std::size_t>(o) * n_in;
#pragma omp simd
        for (int i = 0; i < n_in; ++i) dx[i] += g * wr[i];
      }
    }
  }
}

void sine_backward_inplace(std::span<const double> pre, double scale, std::span<double> d) {
  require(pre.size() >= d.size(), "sine_backward: pre-activation block too small");
  for (std::size_t k = 0; k < d.size(); ++k) d[k] *= scale * std::cos(pre[k]);
}

void axpy(double w, std::span<const double> x, std::span<double> acc) {
  require(x.size() == acc.size(), "axpy: size mismatch");
  const std::size_t n = x.size();
  for (std::size_t k = 0; k < n; ++k) acc[k] += w * x[k];
}

}  // namespace mrnet::kernels
