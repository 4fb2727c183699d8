#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <omp.h>

#include "mrnet/kernels.hpp"
#include "mrnet/nn_core.hpp"
#include "mrnet/parallel.hpp"

using namespace mrnet;

namespace {

struct Case {
  DenseLayer layer;
  std::vector<double> in;
  int rows;
};

// Random shapes, including row counts that straddle the chunk size.
Case random_case(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::uniform_real_distribution<double> u(-1, 1);
  Case c{DenseLayer(pick(1, 40), pick(1, 40)), {}, pick(1, 3 * kernels::kChunkRows + 5)};
  for (double& w : c.layer.weights()) w = u(rng);
  for (double& b : c.layer.bias()) b = u(rng);
  c.in.resize(static_cast<std::size_t>(c.rows) * c.layer.in_dim());
  for (double& v : c.in) v = u(rng);
  return c;
}

std::span<const double> row(const std::vector<double>& m, int r, int width) {
  return std::span<const double>(m).subspan(static_cast<std::size_t>(r) * width, width);
}

}  // namespace

TEST_CASE("batched affine and sine kernels agree with the per-vector reference") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const Case c = random_case(rng);
    const int in = c.layer.in_dim(), out = c.layer.out_dim();
    std::vector<double> lin(static_cast<std::size_t>(c.rows) * out);
    kernels::affine_forward(c.layer, c.in, c.rows, lin);
    std::vector<double> pre(lin.size()), act(lin.size());
    const double scale = trial % 2 == 0 ? 1.0 : 30.0;
    kernels::sine_forward(c.layer, c.in, c.rows, scale, pre, act);
    for (int r = 0; r < c.rows; ++r) {
      const auto ref_lin = linear_layer_forward(c.layer, row(c.in, r, in));
      const auto ref_sin = sine_layer_forward(c.layer, row(c.in, r, in), scale);
      for (int o = 0; o < out; ++o) {
        const std::size_t k = static_cast<std::size_t>(r) * out + o;
        REQUIRE(std::abs(lin[k] - ref_lin[o]) <= 1e-12 * (1.0 + std::abs(ref_lin[o])));
        REQUIRE(std::abs(act[k] - ref_sin[o]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("affine_backward matches scalar accumulation") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 40; ++trial) {
    const Case c = random_case(rng);
    const int in = c.layer.in_dim(), out = c.layer.out_dim();
    std::vector<double> d_out(static_cast<std::size_t>(c.rows) * out);
    for (double& v : d_out) v = u(rng);
    DenseLayer grad(in, out);
    std::vector<double> d_in(static_cast<std::size_t>(c.rows) * in);
    kernels::affine_backward(c.layer, c.in, d_out, c.rows, &grad, d_in);

    DenseLayer ref(in, out);
    std::vector<double> ref_in(d_in.size(), 0.0);
    for (int r = 0; r < c.rows; ++r) {
      for (int o = 0; o < out; ++o) {
        const double g = d_out[static_cast<std::size_t>(r) * out + o];
        ref.bias()[o] += g;
        for (int i = 0; i < in; ++i) {
          ref.weight(o, i) += g * c.in[static_cast<std::size_t>(r) * in + i];
          ref_in[static_cast<std::size_t>(r) * in + i] += g * c.layer.weight(o, i);
        }
      }
    }
    for (std::size_t k = 0; k < ref.weights().size(); ++k) {
      REQUIRE(grad.weights()[k] == doctest::Approx(ref.weights()[k]).epsilon(1e-10).scale(1.0));
    }
    for (std::size_t k = 0; k < ref.bias().size(); ++k) {
      REQUIRE(grad.bias()[k] == doctest::Approx(ref.bias()[k]).epsilon(1e-10).scale(1.0));
    }
    for (std::size_t k = 0; k < ref_in.size(); ++k) {
      REQUIRE(d_in[k] == doctest::Approx(ref_in[k]).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("affine_backward accumulates and leaves d_in alone when empty") {
  DenseLayer l(1, 1);
  l.weight(0, 0) = 2.0;
  const std::vector<double> x{3.0};
  const std::vector<double> d{0.5};
  DenseLayer g(1, 1);
  kernels::affine_backward(l, x, d, 1, &g, {});
  kernels::affine_backward(l, x, d, 1, &g, {});
  CHECK(g.weight(0, 0) == 3.0);
  CHECK(g.bias()[0] == 1.0);
}

TEST_CASE("sine_backward_inplace and axpy") {
  const std::vector<double> pre{0.0, 1.0, -2.0};
  std::vector<double> d{1.0, 2.0, 3.0};
  kernels::sine_backward_inplace(pre, 30.0, d);
  for (int k = 0; k < 3; ++k) CHECK(d[k] == doctest::Approx((k + 1) * 30.0 * std::cos(pre[k])));
  std::vector<double> acc{1.0, 1.0, 1.0};
  kernels::axpy(0.5, std::vector<double>{2.0, 4.0, -2.0}, acc);
  CHECK(acc == std::vector<double>{2.0, 3.0, 0.0});
}

TEST_CASE("chunk partitioning covers every row exactly once for any thread count") {
  for (int rows : {1, 127, 128, 129, 1000}) {
    for (int threads : {1, 3}) {
      omp_set_num_threads(threads);
      std::vector<int> hits(rows, 0);
      parallel_for_chunks(rows, [&](int chunk, int begin, int count) {
        CHECK(begin == chunk * kernels::kChunkRows);
        for (int r = begin; r < begin + count; ++r) ++hits[r];
      });
      for (int h : hits) REQUIRE(h == 1);
    }
  }
  CHECK(kernels::chunk_count(0) == 0);
  CHECK(kernels::chunk_count(129) == 2);
}

TEST_CASE("an exception inside a chunk reaches the caller") {
  CHECK_THROWS_AS(parallel_for_chunks(500, [](int chunk, int, int) {
                    if (chunk == 2) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}
