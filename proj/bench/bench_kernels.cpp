// Serial per-vector reference vs the chunked OpenMP kernels.
//
//   ./build/bench/mrnet_bench --benchmark_filter=forward
//
// Thread counts are the second argument of the parallel cases.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include <omp.h>

#include "mrnet/kernels.hpp"
#include "mrnet/mrnet.hpp"
#include "mrnet/parallel.hpp"

using namespace mrnet;

namespace {

MRNet bench_net() {
  ArchConfig a;  // M-Net, width 96
  a.bands = {4, 8, 16, 32, 64};
  a.seed = 1;
  return init_mrnet(a);
}

std::vector<double> random_coords(int rows) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> c(2 * static_cast<std::size_t>(rows));
  for (double& v : c) v = u(rng);
  return c;
}

// One sample at a time through the per-vector layer functions.
std::vector<double> reference_forward(const MRNet& net, std::span<const double> coords, int rows) {
  const int c = net.channels;
  std::vector<double> out(static_cast<std::size_t>(rows) * c, 0.0);
  for (int r = 0; r < rows; ++r) {
    const auto x = coords.subspan(static_cast<std::size_t>(r) * 2, 2);
    std::vector<double> prev;
    for (int k = 0; k < net.num_stages(); ++k) {
      const auto& s = net.stages[k];
      std::vector<double> h = sine_layer_forward(s.first, x, 1.0);
      for (std::size_t l = 0; l < s.hidden.size(); ++l) {
        if (l == 0 && net.chained() && k > 0) {
          if (net.wiring == Wiring::concat) {
            h.insert(h.end(), prev.begin(), prev.end());
          } else {
            for (std::size_t i = 0; i < h.size(); ++i) h[i] += prev[i];
          }
        }
        h = sine_layer_forward(s.hidden[l], h, s.omega_g);
      }
      const auto y = linear_layer_forward(s.linear, h);
      for (int ch = 0; ch < c; ++ch) out[static_cast<std::size_t>(r) * c + ch] += s.alpha * y[ch];
      prev = std::move(h);
    }
  }
  return out;
}

// Full-batch gradient of the MSE with every stage trainable.
GradientSet gradient(const MRNet& net, std::span<const double> coords, const std::vector<double>& target, int rows,
                     bool chunked) {
  auto one_block = [&](std::span<const double> xs, std::span<const double> ts, int n) {
    const ForwardTrace t = trace_forward(net, xs, n);
    std::vector<double> y(t.stages[0].output.size(), 0.0);
    for (const auto& s : t.stages) kernels::axpy(1.0, s.output, y);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 2.0 * (y[i] - ts[i]) / rows;
    return backward(net, t, std::vector<std::vector<double>>(net.num_stages(), y));
  };
  if (!chunked) return one_block(coords, target, rows);
  std::vector<GradientSet> parts(kernels::chunk_count(rows));
  parallel_for_chunks(rows, [&](int ci, int begin, int count) {
    parts[ci] = one_block(coords.subspan(static_cast<std::size_t>(begin) * 2, static_cast<std::size_t>(count) * 2),
                          std::span<const double>(target).subspan(begin, count), count);
  });
  GradientSet total = std::move(parts[0]);
  for (std::size_t ci = 1; ci < parts.size(); ++ci) {
    for (std::size_t k = 0; k < total.stages.size(); ++k) {
      auto& acc = *total.stages[k];
      const auto& g = *parts[ci].stages[k];
      for (std::size_t l = 0; l < acc.size(); ++l) {
        kernels::axpy(1.0, g[l].weights(), acc[l].weights());
        kernels::axpy(1.0, g[l].bias(), acc[l].bias());
      }
    }
  }
  return total;
}

void BM_forward_serial(benchmark::State& state) {
  const MRNet net = bench_net();
  const int rows = static_cast<int>(state.range(0));
  const auto coords = random_coords(rows);
  for (auto _ : state) benchmark::DoNotOptimize(reference_forward(net, coords, rows));
  state.SetItemsProcessed(state.iterations() * rows);
}

void BM_forward_parallel(benchmark::State& state) {
  const MRNet net = bench_net();
  const int rows = static_cast<int>(state.range(0));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  const auto coords = random_coords(rows);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, coords));
  state.SetItemsProcessed(state.iterations() * rows);
}

void BM_train_step_serial(benchmark::State& state) {
  const MRNet net = bench_net();
  const int rows = static_cast<int>(state.range(0));
  const auto coords = random_coords(rows);
  const std::vector<double> target(rows, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(gradient(net, coords, target, rows, false));
  state.SetItemsProcessed(state.iterations() * rows);
}

void BM_train_step_parallel(benchmark::State& state) {
  const MRNet net = bench_net();
  const int rows = static_cast<int>(state.range(0));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  const auto coords = random_coords(rows);
  const std::vector<double> target(rows, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(gradient(net, coords, target, rows, true));
  state.SetItemsProcessed(state.iterations() * rows);
}

void thread_args(benchmark::internal::Benchmark* b) {
  const int max_threads = omp_get_num_procs();
  for (int rows : {4096, 16384}) {
    for (int t = 1; t <= max_threads; t *= 2) b->Args({rows, t});
    if ((max_threads & (max_threads - 1)) != 0) b->Args({rows, max_threads});
  }
}

}  // namespace

BENCHMARK(BM_forward_serial)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_parallel)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_train_step_serial)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_train_step_parallel)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
